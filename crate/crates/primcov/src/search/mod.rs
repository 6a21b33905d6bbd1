//! Path search on the Primitive Coverage Graph: Greedy Neighborhood Search
//! plus the two viewpoint-based baselines used for benchmark comparison.

mod baseline;
mod gns;

pub use baseline::{baseline_greedy_viewpoints, baseline_vpp_tsp};
pub use gns::gns;

use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::pcg::PrimitiveCoverageGraph;

/// How argmax ties between candidate edges are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Deterministic replays beat arbitrary iteration order.
    #[default]
    SmallestEdgeId,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchParams {
    /// Required coverage ratio in (0, 1].
    pub target_coverage: f64,
    pub tie_break: TieBreak,
    pub max_iterations: usize,
    /// Weight marginal gain by patch area instead of counting bits.
    /// Patches are near-uniform by construction, so this defaults to off.
    pub area_weights: Option<Vec<f64>>,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            target_coverage: 0.99,
            tie_break: TieBreak::SmallestEdgeId,
            max_iterations: 100_000,
            area_weights: None,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_coverage > 0.0 && self.target_coverage <= 1.0) {
            return Err(Error::InvalidParam(
                "target coverage must be in (0, 1]".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParam("max_iterations must be > 0".into()));
        }
        Ok(())
    }

    pub(crate) fn gain(&self, edge_bits: &Bitset, covered: &Bitset) -> f64 {
        match &self.area_weights {
            None => edge_bits.count_new(covered) as f64,
            Some(w) => edge_bits.weighted_new(covered, w),
        }
    }
}

/// One search step for the replayable log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepLog {
    pub edge: u32,
    /// Marginal gain of this step (bits, or area when weighted).
    pub gain: f64,
    /// Coverage ratio after the step.
    pub cumulative_coverage: f64,
    /// True for zero-gain edges appended while escaping a dead end.
    pub escape: bool,
}

/// A connected, branch-less walk over the PCG with its coverage accounting.
#[derive(Debug, Clone)]
pub struct InspectionPath {
    /// Visited node ids, one more than the edges.
    pub node_sequence: Vec<u32>,
    /// Traversed edge ids in order; repeats possible.
    pub edge_sequence: Vec<u32>,
    /// Total flying distance; re-traversals count every time.
    pub total_length: f64,
    /// Achieved coverage ratio.
    pub coverage: f64,
    pub covered: Bitset,
    pub steps: Vec<StepLog>,
    pub method: String,
}

impl InspectionPath {
    /// Walk property: consecutive edges share exactly the path's node
    /// sequence.
    pub fn check_walk(&self, graph: &PrimitiveCoverageGraph) -> Result<()> {
        if self.node_sequence.len() != self.edge_sequence.len() + 1 {
            return Err(Error::InvalidParam(
                "node sequence must be one longer than edge sequence".into(),
            ));
        }
        let mut total = 0.0;
        for (k, &eid) in self.edge_sequence.iter().enumerate() {
            let e = graph.edge(eid);
            let from = self.node_sequence[k];
            let to = self.node_sequence[k + 1];
            if !((e.i == from && e.j == to) || (e.j == from && e.i == to)) {
                return Err(Error::InvalidParam(format!(
                    "edge {} does not join nodes {} and {}",
                    eid, from, to
                )));
            }
            total += e.length;
        }
        if (total - self.total_length).abs() > 1e-9 * total.max(1.0) {
            return Err(Error::InvalidParam("total length mismatch".into()));
        }
        Ok(())
    }

    /// Distinct traversed edges, ascending.
    pub fn distinct_edges(&self) -> Vec<u32> {
        let mut ids = self.edge_sequence.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}
