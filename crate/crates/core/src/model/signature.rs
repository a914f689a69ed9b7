//! Memoized chain-signature registry: the dynamic-computation-graph
//! construction. Each distinct relation sequence up to the max chain
//! length gets one evaluator id; all evaluators share the underlying
//! per-relation parameters.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::EdgeTypeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignatureId(pub usize);

#[derive(Debug, Clone)]
pub struct SignatureRegistry {
    max_chain: usize,
    index: HashMap<Vec<EdgeTypeId>, SignatureId>,
    signatures: Vec<Vec<EdgeTypeId>>,
}

impl SignatureRegistry {
    pub fn new(max_chain: usize) -> Self {
        assert!(max_chain >= 1);
        SignatureRegistry {
            max_chain,
            index: HashMap::new(),
            signatures: Vec::new(),
        }
    }

    pub fn max_chain(&self) -> usize {
        self.max_chain
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }

    /// Returns the memoized evaluator id for this signature, creating
    /// it on first request.
    pub fn get_or_insert(&mut self, sig: &[EdgeTypeId]) -> Result<SignatureId> {
        if sig.is_empty() || sig.len() > self.max_chain {
            return Err(Error::ChainTooLong(sig.len(), self.max_chain));
        }
        if let Some(&id) = self.index.get(sig) {
            return Ok(id);
        }
        let id = SignatureId(self.signatures.len());
        self.index.insert(sig.to_vec(), id);
        self.signatures.push(sig.to_vec());
        Ok(id)
    }

    pub fn signature(&self, id: SignatureId) -> &[EdgeTypeId] {
        &self.signatures[id.0]
    }

    /// Registers every signature over `edge_types` relation types with
    /// length 1..=max_chain, in length-major lexicographic order.
    pub fn enumerate_all(&mut self, edge_types: usize) -> Result<usize> {
        let mut current: Vec<Vec<EdgeTypeId>> = vec![Vec::new()];
        for _ in 0..self.max_chain {
            let mut next = Vec::with_capacity(current.len() * edge_types);
            for prefix in &current {
                for e in 0..edge_types {
                    let mut sig = prefix.clone();
                    sig.push(EdgeTypeId(e as u16));
                    self.get_or_insert(&sig)?;
                    next.push(sig);
                }
            }
            current = next;
        }
        Ok(self.len())
    }
}

/// Number of distinct signatures for `edge_types` relation types and
/// max chain length `c`: Σ_{m=1..c} |L|^m.
pub fn enumerate_signatures(edge_types: usize, c: usize) -> usize {
    (1..=c).map(|m| edge_types.pow(m as u32)).sum()
}
