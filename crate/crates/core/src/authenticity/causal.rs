//! Causal ordering of key events as a directed acyclic graph.
//!
//! Edges come from two sources: the prior-digest link inside each log, and
//! cross-log anchors — an interaction that anchors the digest of another
//! known event places that event strictly before the anchoring one. Hash
//! construction makes mutual reference impossible, so graphs built from
//! valid logs are acyclic; manual edge insertion is guarded anyway.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::log::KeyEventLog;
use super::AuthError;
use crate::canonical::Digest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CausalOrder {
    Before,
    After,
    Incomparable,
}

#[derive(Debug, Clone, Default)]
pub struct CausalGraph {
    nodes: BTreeSet<Digest>,
    /// earlier digest -> set of directly later digests
    edges: BTreeMap<Digest, BTreeSet<Digest>>,
}

impl CausalGraph {
    pub fn new() -> Self {
        CausalGraph::default()
    }

    pub fn add_node(&mut self, digest: Digest) {
        self.nodes.insert(digest);
    }

    pub fn contains(&self, digest: &Digest) -> bool {
        self.nodes.contains(digest)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Digest> {
        self.nodes.iter()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&Digest, &Digest)> {
        self.edges
            .iter()
            .flat_map(|(from, tos)| tos.iter().map(move |to| (from, to)))
    }

    /// Insert `earlier -> later`. Both endpoints must exist and the edge
    /// must not close a cycle.
    pub fn add_edge(&mut self, earlier: &Digest, later: &Digest) -> Result<(), AuthError> {
        if !self.nodes.contains(earlier) {
            return Err(AuthError::UnknownEvent(earlier.clone()));
        }
        if !self.nodes.contains(later) {
            return Err(AuthError::UnknownEvent(later.clone()));
        }
        if earlier == later || self.reachable(later, earlier) {
            return Err(AuthError::WouldCycle);
        }
        self.edges
            .entry(earlier.clone())
            .or_default()
            .insert(later.clone());
        Ok(())
    }

    /// Build the causal graph over a set of logs.
    pub fn from_logs(logs: &[&KeyEventLog]) -> Result<Self, AuthError> {
        let mut graph = CausalGraph::new();
        let mut digests: Vec<Vec<Digest>> = Vec::with_capacity(logs.len());
        for log in logs {
            let ds: Vec<Digest> = log
                .events
                .iter()
                .map(|e| e.event_digest())
                .collect::<Result<_, _>>()?;
            for d in &ds {
                graph.add_node(d.clone());
            }
            digests.push(ds);
        }
        for (log, ds) in logs.iter().zip(&digests) {
            for (i, event) in log.events.iter().enumerate() {
                if i > 0 {
                    graph.add_edge(&ds[i - 1], &ds[i])?;
                }
                for anchor in &event.anchors {
                    if graph.contains(anchor) && anchor != &ds[i] {
                        graph.add_edge(anchor, &ds[i])?;
                    }
                }
            }
        }
        Ok(graph)
    }

    fn reachable(&self, from: &Digest, to: &Digest) -> bool {
        if from == to {
            return true;
        }
        let mut seen: BTreeSet<&Digest> = BTreeSet::new();
        let mut queue: VecDeque<&Digest> = VecDeque::new();
        queue.push_back(from);
        while let Some(node) = queue.pop_front() {
            if let Some(nexts) = self.edges.get(node) {
                for next in nexts {
                    if next == to {
                        return true;
                    }
                    if seen.insert(next) {
                        queue.push_back(next);
                    }
                }
            }
        }
        false
    }

    /// Strict causal comparison of two distinct known events.
    pub fn happened_before(&self, e1: &Digest, e2: &Digest) -> Result<CausalOrder, AuthError> {
        if !self.nodes.contains(e1) {
            return Err(AuthError::UnknownEvent(e1.clone()));
        }
        if !self.nodes.contains(e2) {
            return Err(AuthError::UnknownEvent(e2.clone()));
        }
        if e1 == e2 {
            return Err(AuthError::IdenticalEvents);
        }
        if self.reachable(e1, e2) {
            Ok(CausalOrder::Before)
        } else if self.reachable(e2, e1) {
            Ok(CausalOrder::After)
        } else {
            Ok(CausalOrder::Incomparable)
        }
    }
}
