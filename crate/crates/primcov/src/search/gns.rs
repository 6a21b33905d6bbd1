//! Greedy Neighborhood Search: grow a walk edge-by-edge, always taking the
//! incident edge with the best marginal coverage per meter, escaping
//! zero-gain neighborhoods through shortest walks.

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::pcg::PrimitiveCoverageGraph;

use super::{InspectionPath, SearchParams, StepLog};

/// Search the PCG for a connected, branch-less walk reaching the target
/// coverage ratio.
///
/// Initialization scans every edge for the best coverage-per-distance and
/// traverses that edge first, starting from its lower-id endpoint. Each
/// following step takes the incident edge maximizing marginal gain over
/// length (ties to the smallest edge id). When every incident edge has zero
/// gain, the walk escapes along the shortest walk to the nearest node with a
/// positive-gain incident edge; escape edges count toward distance but not
/// coverage.
pub fn gns(graph: &PrimitiveCoverageGraph, params: &SearchParams) -> Result<InspectionPath> {
    params.validate()?;
    if graph.edge_count() == 0 {
        return Err(Error::UnreachableCoverage {
            target: params.target_coverage,
            max: 0.0,
        });
    }
    let m = graph.patch_count();
    let (_, max_ratio) = graph.max_coverage();
    if max_ratio < params.target_coverage {
        return Err(Error::UnreachableCoverage {
            target: params.target_coverage,
            max: max_ratio,
        });
    }

    let empty = Bitset::new(m);
    let ratio_of = |covered: &Bitset| covered.count_ones() as f64 / m as f64;

    // Globally best edge by coverage over distance seeds the walk.
    let mut best: Option<(f64, u32)> = None;
    for e in graph.edges() {
        let score = params.gain(&e.visibility, &empty) / e.length;
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, e.id));
        }
    }
    let (_, first_edge) = best.expect("graph has edges");
    let first = graph.edge(first_edge);

    let mut covered = first.visibility.clone();
    let mut current = first.j; // entered from the lower-id endpoint
    let mut node_sequence = vec![first.i, first.j];
    let mut edge_sequence = vec![first_edge];
    let mut total_length = first.length;
    let mut delta = ratio_of(&covered);
    let mut steps = vec![StepLog {
        edge: first_edge,
        gain: params.gain(&first.visibility, &empty),
        cumulative_coverage: delta,
        escape: false,
    }];

    let mut iterations = 1usize;
    while delta < params.target_coverage {
        iterations += 1;
        if iterations > params.max_iterations {
            return Err(Error::IterationCap(params.max_iterations));
        }

        // Incident edge ids ascend, so a strict max lands on the smallest id
        // among ties.
        let mut choice: Option<(f64, u32)> = None;
        for &eid in graph.incident(current) {
            let e = graph.edge(eid);
            let gain = params.gain(&e.visibility, &covered);
            if gain <= 0.0 {
                continue;
            }
            let score = gain / e.length;
            if choice.is_none_or(|(s, _)| score > s) {
                choice = Some((score, eid));
            }
        }

        match choice {
            Some((_, eid)) => {
                let e = graph.edge(eid);
                let gain = params.gain(&e.visibility, &covered);
                covered.union_with(&e.visibility);
                delta = ratio_of(&covered);
                current = e.other_end(current);
                node_sequence.push(current);
                edge_sequence.push(eid);
                total_length += e.length;
                steps.push(StepLog {
                    edge: eid,
                    gain,
                    cumulative_coverage: delta,
                    escape: false,
                });
            }
            None => {
                // Dead end: no incident edge adds coverage. Walk to the
                // nearest node that still has a positive-gain edge.
                let walk = graph.shortest_walk(current, |node| {
                    graph
                        .incident(node)
                        .iter()
                        .any(|&eid| params.gain(&graph.edge(eid).visibility, &covered) > 0.0)
                });
                let Some((escape_edges, _)) = walk else {
                    // Positive-gain edges exist (coverage target is
                    // reachable) but not from this component.
                    return Err(Error::UnreachableCoverage {
                        target: params.target_coverage,
                        max: delta,
                    });
                };
                debug_assert!(!escape_edges.is_empty());
                for eid in escape_edges {
                    iterations += 1;
                    if iterations > params.max_iterations {
                        return Err(Error::IterationCap(params.max_iterations));
                    }
                    let e = graph.edge(eid);
                    current = e.other_end(current);
                    node_sequence.push(current);
                    edge_sequence.push(eid);
                    total_length += e.length;
                    steps.push(StepLog {
                        edge: eid,
                        gain: 0.0,
                        cumulative_coverage: delta,
                        escape: true,
                    });
                }
            }
        }
    }

    Ok(InspectionPath {
        node_sequence,
        edge_sequence,
        total_length,
        coverage: delta,
        covered,
        steps,
        method: "gns".into(),
    })
}
