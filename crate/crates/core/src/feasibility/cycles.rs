//! Decomposition of a nonnegative circulation into weighted simple cycles.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::Rational;

/// A directed edge with a nonnegative weight. `id` lets callers map cycles
/// back to the rows that produced them; parallel edges stay distinct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    #[serde(with = "crate::numerics::rational_serde")]
    pub weight: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    /// Nodes `c_0, …, c_{L−1}` without repetition.
    pub nodes: Vec<usize>,
    /// Edge ids; edge `i` runs from `c_i` to `c_{i+1 mod L}`.
    pub edges: Vec<usize>,
    #[serde(with = "crate::numerics::rational_serde")]
    pub weight: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CycleError {
    #[error("edge {0} has negative weight")]
    NegativeWeight(usize),
    #[error("flow is not conserved at node {0}")]
    NotConserved(usize),
    #[error("edge id {0} used twice")]
    DuplicateId(usize),
}

/// Split the weighted edge set into simple cycles whose weighted sum
/// reproduces every edge weight exactly. Zero-weight edges are ignored.
pub fn decompose_cycles(edges: &[WeightedEdge]) -> Result<Vec<Cycle>, CycleError> {
    let mut balance: BTreeMap<usize, Rational> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for e in edges {
        if !seen.insert(e.id) {
            return Err(CycleError::DuplicateId(e.id));
        }
        if e.weight.is_negative() {
            return Err(CycleError::NegativeWeight(e.id));
        }
        *balance.entry(e.from).or_insert_with(Rational::zero) -= &e.weight;
        *balance.entry(e.to).or_insert_with(Rational::zero) += &e.weight;
    }
    if let Some((node, _)) = balance.iter().find(|(_, b)| !b.is_zero()) {
        return Err(CycleError::NotConserved(*node));
    }

    let mut remaining: Vec<Rational> = edges.iter().map(|e| e.weight.clone()).collect();
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, e) in edges.iter().enumerate() {
        out.entry(e.from).or_default().push(i);
    }
    let mut cycles = Vec::new();
    while let Some(start) = remaining.iter().position(|w| w.is_positive()) {
        // Walk along positive edges until a node repeats. Conservation
        // guarantees every visited node has a positive outgoing edge.
        let mut path_nodes = vec![edges[start].from];
        let mut path_edges: Vec<usize> = Vec::new();
        let mut next = start;
        loop {
            path_edges.push(next);
            let node = edges[next].to;
            if let Some(pos) = path_nodes.iter().position(|&n| n == node) {
                let nodes = path_nodes[pos..].to_vec();
                let cyc_edges: Vec<usize> = path_edges[pos..].to_vec();
                let weight = cyc_edges
                    .iter()
                    .map(|&i| remaining[i].clone())
                    .min()
                    .expect("nonempty cycle");
                for &i in &cyc_edges {
                    remaining[i] -= &weight;
                }
                cycles.push(Cycle {
                    nodes,
                    edges: cyc_edges.iter().map(|&i| edges[i].id).collect(),
                    weight,
                });
                break;
            }
            path_nodes.push(node);
            next = out
                .get(&node)
                .and_then(|es| es.iter().copied().find(|&i| remaining[i].is_positive()))
                .expect("conservation leaves an outgoing edge");
        }
    }
    Ok(cycles)
}
