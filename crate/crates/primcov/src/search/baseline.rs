//! Viewpoint-based baseline planners: select discrete viewpoints first, then
//! order them with a TSP heuristic and realize the tour as shortest walks on
//! the PCG, so every method shares one roadmap.
//!
//! Two selection rules ship: marginal gain per travel distance (the greedy
//! baseline) and pure marginal gain, which minimizes viewpoint count (the
//! selection stage of VPP-TSP).

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::pcg::PrimitiveCoverageGraph;

use super::{InspectionPath, SearchParams};

const TWO_OPT_MOVE_CAP: usize = 10_000;

/// Greedy viewpoint baseline: iteratively add the most cost-effective
/// viewpoint (marginal gain over shortest-walk distance from the already
/// selected set; the first pick is pure gain), then tour the selection.
pub fn baseline_greedy_viewpoints(
    graph: &PrimitiveCoverageGraph,
    viewpoint_visibility: &[Bitset],
    params: &SearchParams,
) -> Result<InspectionPath> {
    let selected = select_viewpoints(graph, viewpoint_visibility, params, true)?;
    realize_tour(graph, viewpoint_visibility, &selected, "greedy")
}

/// VPP-TSP baseline: greedy set cover on pure marginal gain (minimizing the
/// viewpoint count), then tour the selection.
pub fn baseline_vpp_tsp(
    graph: &PrimitiveCoverageGraph,
    viewpoint_visibility: &[Bitset],
    params: &SearchParams,
) -> Result<InspectionPath> {
    let selected = select_viewpoints(graph, viewpoint_visibility, params, false)?;
    realize_tour(graph, viewpoint_visibility, &selected, "vpp-tsp")
}

fn select_viewpoints(
    graph: &PrimitiveCoverageGraph,
    viewpoint_visibility: &[Bitset],
    params: &SearchParams,
    weight_by_distance: bool,
) -> Result<Vec<u32>> {
    params.validate()?;
    assert_eq!(viewpoint_visibility.len(), graph.node_count());
    let m = graph.patch_count();

    let mut reachable_max = Bitset::new(m);
    for bits in viewpoint_visibility {
        reachable_max.union_with(bits);
    }
    let max_ratio = reachable_max.count_ones() as f64 / m as f64;
    if max_ratio < params.target_coverage {
        return Err(Error::UnreachableCoverage {
            target: params.target_coverage,
            max: max_ratio,
        });
    }

    let mut covered = Bitset::new(m);
    let mut selected: Vec<u32> = Vec::new();
    let mut dist_to_selected = vec![f64::INFINITY; graph.node_count()];

    while (covered.count_ones() as f64 / m as f64) < params.target_coverage {
        let mut best: Option<(f64, u32)> = None;
        for (v, bits) in viewpoint_visibility.iter().enumerate() {
            let gain = params.gain(bits, &covered);
            if gain <= 0.0 {
                continue;
            }
            let score = if !weight_by_distance || selected.is_empty() {
                gain
            } else {
                let d = dist_to_selected[v];
                if !d.is_finite() || d <= 0.0 {
                    continue; // unreachable from the current selection
                }
                gain / d
            };
            if best.is_none_or(|(s, _)| score > s) {
                best = Some((score, v as u32));
            }
        }
        let Some((_, pick)) = best else {
            return Err(Error::Disconnected(
                "remaining coverage is not reachable from the selected viewpoints".into(),
            ));
        };
        covered.union_with(&viewpoint_visibility[pick as usize]);
        selected.push(pick);
        for (v, d) in graph.shortest_distances(pick).into_iter().enumerate() {
            if d < dist_to_selected[v] {
                dist_to_selected[v] = d;
            }
        }
    }
    Ok(selected)
}

/// Order the selected viewpoints with nearest-neighbor + 2-opt over pairwise
/// shortest-walk distances, then realize the open tour as concatenated
/// shortest walks.
fn realize_tour(
    graph: &PrimitiveCoverageGraph,
    viewpoint_visibility: &[Bitset],
    selected: &[u32],
    method: &str,
) -> Result<InspectionPath> {
    let m = graph.patch_count();
    let mut covered = Bitset::new(m);
    for &v in selected {
        covered.union_with(&viewpoint_visibility[v as usize]);
    }

    if selected.len() <= 1 {
        // A single viewpoint needs no flying at all.
        let node = *selected.first().ok_or_else(|| {
            Error::InvalidParam("viewpoint selection is empty".into())
        })?;
        let coverage = covered.count_ones() as f64 / m as f64;
        return Ok(InspectionPath {
            node_sequence: vec![node],
            edge_sequence: vec![],
            total_length: 0.0,
            coverage,
            covered,
            steps: vec![],
            method: method.into(),
        });
    }

    // Pairwise shortest-walk distance matrix over the selection.
    let k = selected.len();
    let mut matrix = vec![vec![f64::INFINITY; k]; k];
    for (row, &v) in selected.iter().enumerate() {
        let dist = graph.shortest_distances(v);
        for (col, &w) in selected.iter().enumerate() {
            matrix[row][col] = dist[w as usize];
        }
    }
    for (row, m_row) in matrix.iter().enumerate() {
        for (col, d) in m_row.iter().enumerate() {
            if row != col && !d.is_finite() {
                return Err(Error::Disconnected(format!(
                    "selected viewpoints {} and {} are not connected on the graph",
                    selected[row], selected[col]
                )));
            }
        }
    }

    let mut tour = nearest_neighbor_tour(&matrix);
    two_opt_improve(&mut tour, &matrix);

    // Concatenate shortest walks between consecutive tour stops.
    let mut node_sequence = vec![selected[tour[0]]];
    let mut edge_sequence = Vec::new();
    let mut total_length = 0.0;
    for pair in tour.windows(2) {
        let from = selected[pair[0]];
        let to = selected[pair[1]];
        let (walk, cost) = graph
            .shortest_walk(from, |n| n == to)
            .ok_or_else(|| Error::Disconnected(format!("no walk from {} to {}", from, to)))?;
        let mut cursor = from;
        for eid in walk {
            cursor = graph.edge(eid).other_end(cursor);
            node_sequence.push(cursor);
            edge_sequence.push(eid);
        }
        total_length += cost;
    }

    // The realized walk also films; its edge coverage counts alongside the
    // selected viewpoints.
    let (edge_cov, _) = graph.coverage_of(edge_sequence.iter().copied());
    covered.union_with(&edge_cov);
    let coverage = covered.count_ones() as f64 / m as f64;

    Ok(InspectionPath {
        node_sequence,
        edge_sequence,
        total_length,
        coverage,
        covered,
        steps: vec![],
        method: method.into(),
    })
}

/// Open-path nearest-neighbor construction starting from the first selected
/// viewpoint; ties go to the smaller index.
fn nearest_neighbor_tour(matrix: &[Vec<f64>]) -> Vec<usize> {
    let k = matrix.len();
    let mut tour = vec![0usize];
    let mut used = vec![false; k];
    used[0] = true;
    while tour.len() < k {
        let last = *tour.last().unwrap();
        let mut best: Option<(f64, usize)> = None;
        for (cand, &flag) in used.iter().enumerate() {
            if flag {
                continue;
            }
            let d = matrix[last][cand];
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, cand));
            }
        }
        let (_, next) = best.unwrap();
        used[next] = true;
        tour.push(next);
    }
    tour
}

#[cfg(test)]
fn tour_cost(tour: &[usize], matrix: &[Vec<f64>]) -> f64 {
    tour.windows(2).map(|w| matrix[w[0]][w[1]]).sum()
}

/// First-improvement 2-opt on an open path (segment reversal), capped at
/// 10,000 improving moves.
fn two_opt_improve(tour: &mut Vec<usize>, matrix: &[Vec<f64>]) {
    let n = tour.len();
    if n < 3 {
        return;
    }
    let mut moves = 0usize;
    let mut improved = true;
    while improved && moves < TWO_OPT_MOVE_CAP {
        improved = false;
        'scan: for i in 0..n - 1 {
            for j in i + 1..n {
                if i == 0 && j == n - 1 {
                    continue; // full reversal of an open path changes nothing
                }
                let mut delta = 0.0;
                if i > 0 {
                    delta += matrix[tour[i - 1]][tour[j]] - matrix[tour[i - 1]][tour[i]];
                }
                if j + 1 < n {
                    delta += matrix[tour[i]][tour[j + 1]] - matrix[tour[j]][tour[j + 1]];
                }
                if delta < -1e-12 {
                    tour[i..=j].reverse();
                    moves += 1;
                    improved = true;
                    if moves >= TWO_OPT_MOVE_CAP {
                        break 'scan;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcg::test_support::{bits_from, random_graph, via_point};
    use crate::pcg::PrimitiveCoverageGraph;
    use rand::{Rng, SeedableRng};

    fn params(target: f64) -> SearchParams {
        SearchParams {
            target_coverage: target,
            ..Default::default()
        }
    }

    #[test]
    fn single_viewpoint_sees_everything() {
        let nodes = vec![via_point(0, 0.0, 0.0, 0.0), via_point(1, 5.0, 0.0, 0.0)];
        let m = 6;
        let g = PrimitiveCoverageGraph::from_parts(
            nodes,
            vec![(0, 1, 5.0, bits_from(&[0], m))],
            m,
        )
        .unwrap();
        let all: Vec<usize> = (0..m).collect();
        let vis = vec![bits_from(&all, m), bits_from(&[], m)];

        for f in [baseline_greedy_viewpoints, baseline_vpp_tsp] {
            let path = f(&g, &vis, &params(0.99)).unwrap();
            assert_eq!(path.total_length, 0.0);
            assert_eq!(path.node_sequence, vec![0]);
            assert!(path.edge_sequence.is_empty());
            assert_eq!(path.coverage, 1.0);
        }
    }

    #[test]
    fn two_half_viewpoints_tour_the_connecting_edge() {
        let nodes = vec![via_point(0, 0.0, 0.0, 0.0), via_point(1, 10.0, 0.0, 0.0)];
        let m = 8;
        let left: Vec<usize> = (0..4).collect();
        let right: Vec<usize> = (4..8).collect();
        let g = PrimitiveCoverageGraph::from_parts(
            nodes,
            vec![(0, 1, 10.0, bits_from(&[], m))],
            m,
        )
        .unwrap();
        let vis = vec![bits_from(&left, m), bits_from(&right, m)];

        for f in [baseline_greedy_viewpoints, baseline_vpp_tsp] {
            let path = f(&g, &vis, &params(1.0)).unwrap();
            assert_eq!(path.total_length, 10.0);
            assert_eq!(path.coverage, 1.0);
            path.check_walk(&g).unwrap();
        }
    }

    #[test]
    fn set_cover_picks_the_minimal_three_of_five() {
        // Universe of 9 patches; viewpoints 0..2 cover disjoint thirds, 3
        // and 4 cover scattered subsets that never suffice.
        let m = 9;
        let nodes: Vec<_> = (0..5).map(|i| via_point(i, i as f64, 0.0, 0.0)).collect();
        let mut edges = Vec::new();
        for i in 0..4u32 {
            edges.push((i, i + 1, 1.0, bits_from(&[], m)));
        }
        let g = PrimitiveCoverageGraph::from_parts(nodes, edges, m).unwrap();
        let vis = vec![
            bits_from(&[0, 1, 2], m),
            bits_from(&[3, 4, 5], m),
            bits_from(&[6, 7, 8], m),
            bits_from(&[0, 3], m),
            bits_from(&[1, 4], m),
        ];
        let path = baseline_vpp_tsp(&g, &vis, &params(1.0)).unwrap();
        // The tour visits exactly the three covering viewpoints.
        let mut stops: Vec<u32> = path.node_sequence.clone();
        stops.sort_unstable();
        stops.dedup();
        assert!(stops.contains(&0) && stops.contains(&1) && stops.contains(&2));
        assert_eq!(path.coverage, 1.0);
    }

    #[test]
    fn two_opt_never_worse_than_nearest_neighbor() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(404);
        for _ in 0..20 {
            let n = 30;
            // Symmetric random metric-ish matrix.
            let pts: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random::<f64>() * 100.0, rng.random::<f64>() * 100.0))
                .collect();
            let matrix: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let dx = pts[i].0 - pts[j].0;
                            let dy = pts[i].1 - pts[j].1;
                            (dx * dx + dy * dy).sqrt()
                        })
                        .collect()
                })
                .collect();
            let nn = nearest_neighbor_tour(&matrix);
            let nn_cost = tour_cost(&nn, &matrix);
            let mut improved = nn.clone();
            two_opt_improve(&mut improved, &matrix);
            let improved_cost = tour_cost(&improved, &matrix);
            assert!(improved_cost <= nn_cost + 1e-9);
        }
    }

    #[test]
    fn baselines_reach_target_on_random_graphs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(808);
        for _ in 0..10 {
            let g = random_graph(&mut rng, 10, 8, 30);
            // Synthesize viewpoint vectors as subsets of incident edges.
            let vis: Vec<Bitset> = (0..g.node_count() as u32)
                .map(|v| {
                    let (cov, _) = g.coverage_of(g.incident(v).iter().copied());
                    cov
                })
                .collect();
            let mut max = Bitset::new(g.patch_count());
            for b in &vis {
                max.union_with(b);
            }
            let target = (max.count_ones() as f64 / g.patch_count() as f64).min(0.9);
            if target <= 0.0 {
                continue;
            }
            for f in [baseline_greedy_viewpoints, baseline_vpp_tsp] {
                let path = f(&g, &vis, &params(target)).unwrap();
                assert!(path.coverage >= target);
                path.check_walk(&g).unwrap();
            }
        }
    }
}
