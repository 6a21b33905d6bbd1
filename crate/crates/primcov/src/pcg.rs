//! The Primitive Coverage Graph (PCG): nodes are via-points, undirected
//! edges are path primitives carrying flying distance and a per-patch
//! visibility vector. Immutable after construction; all queries are
//! read-only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;
use std::collections::HashMap;

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::geometry::{Bvh, SurfacePatchSet};
use crate::sampling::{PathPrimitive, ViaPoint};
use crate::visibility::{primitive_visibility, VisibilityModel};

pub const PCG_FORMAT: &str = "pcg/1";

#[derive(Debug, Clone)]
pub struct PcgEdge {
    pub id: u32,
    /// Endpoint node ids, `i < j`.
    pub i: u32,
    pub j: u32,
    pub length: f64,
    pub visibility: Bitset,
}

impl PcgEdge {
    pub fn other_end(&self, node: u32) -> u32 {
        if node == self.i {
            self.j
        } else {
            self.i
        }
    }
}

#[derive(Debug, Clone)]
pub struct PrimitiveCoverageGraph {
    nodes: Vec<ViaPoint>,
    edges: Vec<PcgEdge>,
    /// Incident edge ids per node, ascending.
    adjacency: Vec<Vec<u32>>,
    /// Patch count every visibility vector must match.
    m: usize,
}

/// Metadata stored alongside the graph in its JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcgMeta {
    pub m: usize,
    pub mesh_hash: String,
    pub params: serde_json::Value,
}

impl PrimitiveCoverageGraph {
    /// Assemble a graph from prepared parts. Duplicate edges for the same
    /// unordered pair keep the shorter primitive; self-loops are rejected.
    pub fn from_parts(nodes: Vec<ViaPoint>, edges: Vec<(u32, u32, f64, Bitset)>, m: usize) -> Result<Self> {
        let n = nodes.len() as u32;
        let mut by_pair: HashMap<(u32, u32), (f64, Bitset)> = HashMap::new();
        for (a, b, length, visibility) in edges {
            if a == b {
                return Err(Error::InvalidParam(format!("self-loop at node {}", a)));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidParam(format!(
                    "edge ({}, {}) references a missing node",
                    a, b
                )));
            }
            if !(length > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "edge ({}, {}) has non-positive length",
                    a, b
                )));
            }
            if visibility.len() != m {
                return Err(Error::InvalidParam(format!(
                    "edge ({}, {}) visibility length {} != m {}",
                    a,
                    b,
                    visibility.len(),
                    m
                )));
            }
            let key = (a.min(b), a.max(b));
            match by_pair.get(&key) {
                Some((existing, _)) if *existing <= length => {
                    log::warn!(
                        "duplicate primitive for pair {:?}; keeping the shorter ({:.3} m)",
                        key,
                        existing
                    );
                }
                Some(_) => {
                    log::warn!(
                        "duplicate primitive for pair {:?}; keeping the shorter ({:.3} m)",
                        key,
                        length
                    );
                    by_pair.insert(key, (length, visibility));
                }
                None => {
                    by_pair.insert(key, (length, visibility));
                }
            }
        }

        let mut pairs: Vec<_> = by_pair.into_iter().collect();
        pairs.sort_by_key(|((a, b), _)| (*a, *b));
        let edges: Vec<PcgEdge> = pairs
            .into_iter()
            .enumerate()
            .map(|(id, ((i, j), (length, visibility)))| PcgEdge {
                id: id as u32,
                i,
                j,
                length,
                visibility,
            })
            .collect();

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &edges {
            adjacency[e.i as usize].push(e.id);
            adjacency[e.j as usize].push(e.id);
        }

        Ok(PrimitiveCoverageGraph {
            nodes,
            edges,
            adjacency,
            m,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn patch_count(&self) -> usize {
        self.m
    }

    pub fn nodes(&self) -> &[ViaPoint] {
        &self.nodes
    }

    pub fn node(&self, id: u32) -> &ViaPoint {
        &self.nodes[id as usize]
    }

    pub fn edges(&self) -> &[PcgEdge] {
        &self.edges
    }

    pub fn edge(&self, id: u32) -> &PcgEdge {
        &self.edges[id as usize]
    }

    /// Incident edge ids of a node, ascending.
    pub fn incident(&self, node: u32) -> &[u32] {
        &self.adjacency[node as usize]
    }

    pub fn degree(&self, node: u32) -> usize {
        self.adjacency[node as usize].len()
    }

    /// OR of the visibility vectors over a set of edges and the resulting
    /// coverage ratio.
    pub fn coverage_of(&self, edge_ids: impl IntoIterator<Item = u32>) -> (Bitset, f64) {
        let mut covered = Bitset::new(self.m);
        for id in edge_ids {
            covered.union_with(&self.edges[id as usize].visibility);
        }
        let ratio = if self.m == 0 {
            0.0
        } else {
            covered.count_ones() as f64 / self.m as f64
        };
        (covered, ratio)
    }

    /// Maximum achievable coverage using every edge.
    pub fn max_coverage(&self) -> (Bitset, f64) {
        self.coverage_of(self.edges.iter().map(|e| e.id))
    }

    /// Minimal-total-length walk from `from` to the nearest node satisfying
    /// `pred` (uniform-cost search). Returns the ordered edge ids and the
    /// total length; `None` when no satisfying node is reachable. A start
    /// node that already satisfies the predicate yields an empty walk.
    pub fn shortest_walk(&self, from: u32, pred: impl Fn(u32) -> bool) -> Option<(Vec<u32>, f64)> {
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent_edge: Vec<Option<u32>> = vec![None; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[from as usize] = 0.0;
        heap.push(HeapEntry {
            cost: 0.0,
            node: from,
        });

        while let Some(HeapEntry { cost, node }) = heap.pop() {
            if settled[node as usize] {
                continue;
            }
            settled[node as usize] = true;
            if pred(node) {
                let mut walk = Vec::new();
                let mut cursor = node;
                while let Some(eid) = parent_edge[cursor as usize] {
                    walk.push(eid);
                    cursor = self.edges[eid as usize].other_end(cursor);
                }
                walk.reverse();
                return Some((walk, cost));
            }
            for &eid in &self.adjacency[node as usize] {
                let edge = &self.edges[eid as usize];
                let next = edge.other_end(node);
                let next_cost = cost + edge.length;
                if next_cost < dist[next as usize] {
                    dist[next as usize] = next_cost;
                    parent_edge[next as usize] = Some(eid);
                    heap.push(HeapEntry {
                        cost: next_cost,
                        node: next,
                    });
                }
            }
        }
        None
    }

    /// Shortest-walk distances from one node to every node.
    pub fn shortest_distances(&self, from: u32) -> Vec<f64> {
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[from as usize] = 0.0;
        heap.push(HeapEntry {
            cost: 0.0,
            node: from,
        });
        while let Some(HeapEntry { cost, node }) = heap.pop() {
            if settled[node as usize] {
                continue;
            }
            settled[node as usize] = true;
            for &eid in &self.adjacency[node as usize] {
                let edge = &self.edges[eid as usize];
                let next = edge.other_end(node);
                let next_cost = cost + edge.length;
                if next_cost < dist[next as usize] {
                    dist[next as usize] = next_cost;
                    heap.push(HeapEntry {
                        cost: next_cost,
                        node: next,
                    });
                }
            }
        }
        dist
    }

    /// Structural consistency check: valid endpoints, positive lengths,
    /// matched vector lengths, simple undirected adjacency in both
    /// directions.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len() as u32;
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if e.i >= n || e.j >= n || e.i == e.j {
                return Err(Error::InvalidParam(format!("bad edge endpoints ({}, {})", e.i, e.j)));
            }
            if !(e.length > 0.0) {
                return Err(Error::InvalidParam(format!("edge {} has non-positive length", e.id)));
            }
            if e.visibility.len() != self.m {
                return Err(Error::InvalidParam(format!("edge {} visibility length mismatch", e.id)));
            }
            if !seen.insert((e.i.min(e.j), e.i.max(e.j))) {
                return Err(Error::InvalidParam(format!("duplicate pair ({}, {})", e.i, e.j)));
            }
            if !self.adjacency[e.i as usize].contains(&e.id)
                || !self.adjacency[e.j as usize].contains(&e.id)
            {
                return Err(Error::InvalidParam(format!("edge {} missing from adjacency", e.id)));
            }
        }
        for (node, incident) in self.adjacency.iter().enumerate() {
            for &eid in incident {
                let e = &self.edges[eid as usize];
                if e.i as usize != node && e.j as usize != node {
                    return Err(Error::InvalidParam(format!(
                        "adjacency of node {} lists foreign edge {}",
                        node, eid
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self, meta: &PcgMeta) -> Result<String> {
        let file = PcgFile {
            format: PCG_FORMAT.to_string(),
            meta: meta.clone(),
            nodes: self
                .nodes
                .iter()
                .map(|n| PcgFileNode {
                    id: n.id,
                    p: n.position.into(),
                    dir: n.direction.into(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| PcgFileEdge {
                    id: e.id,
                    i: e.i,
                    j: e.j,
                    length: e.length,
                    visibility: e.visibility.to_hex(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<(Self, PcgMeta)> {
        let file: PcgFile = serde_json::from_str(text)?;
        if file.format != PCG_FORMAT {
            return Err(Error::MalformedArtifact {
                what: "pcg file".into(),
                reason: format!("unsupported format tag {:?}", file.format),
            });
        }
        let nodes: Vec<ViaPoint> = file
            .nodes
            .iter()
            .map(|n| ViaPoint {
                id: n.id,
                position: n.p.into(),
                direction: n.dir.into(),
            })
            .collect();
        let mut edges = Vec::with_capacity(file.edges.len());
        for e in &file.edges {
            edges.push((
                e.i,
                e.j,
                e.length,
                Bitset::from_hex(&e.visibility, file.meta.m)?,
            ));
        }
        let graph = Self::from_parts(nodes, edges, file.meta.m)?;
        Ok((graph, file.meta))
    }
}

/// Build the PCG from sampled via-points and primitives: per-primitive
/// visibility vectors are computed in parallel (deterministic order), polyline
/// lengths become edge weights, and isolated nodes are retained.
pub fn build_pcg(
    via_points: &[ViaPoint],
    primitives: &[PathPrimitive],
    patches: &SurfacePatchSet,
    bvh: &Bvh,
    model: &VisibilityModel,
) -> Result<PrimitiveCoverageGraph> {
    let vectors: Vec<Bitset> = primitives
        .par_iter()
        .map(|p| primitive_visibility(model, p, patches, bvh))
        .collect();
    let edges: Vec<(u32, u32, f64, Bitset)> = primitives
        .iter()
        .zip(vectors)
        .map(|(p, bits)| (p.i, p.j, p.length, bits))
        .collect();
    PrimitiveCoverageGraph::from_parts(via_points.to_vec(), edges, patches.len())
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    cost: f64,
    node: u32,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.node == other.node
    }
}
impl Eq for HeapEntry {}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap by (cost, node id) for deterministic settle order.
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Serialize, Deserialize)]
struct PcgFileNode {
    id: u32,
    p: [f64; 3],
    dir: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct PcgFileEdge {
    id: u32,
    i: u32,
    j: u32,
    length: f64,
    visibility: String,
}

#[derive(Serialize, Deserialize)]
struct PcgFile {
    format: String,
    meta: PcgMeta,
    nodes: Vec<PcgFileNode>,
    edges: Vec<PcgFileEdge>,
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::math::vec3;
    use rand::Rng;

    pub fn via_point(id: u32, x: f64, y: f64, z: f64) -> ViaPoint {
        ViaPoint {
            id,
            position: vec3(x, y, z),
            direction: crate::math::Vec3::X,
        }
    }

    pub fn bits_from(indices: &[usize], m: usize) -> Bitset {
        let mut b = Bitset::new(m);
        for &i in indices {
            b.set(i, true);
        }
        b
    }

    /// Random connected graph with integer-ish lengths and random visibility
    /// vectors; used by search and oracle tests.
    pub fn random_graph(
        rng: &mut impl Rng,
        n_nodes: usize,
        extra_edges: usize,
        m: usize,
    ) -> PrimitiveCoverageGraph {
        let nodes: Vec<ViaPoint> = (0..n_nodes)
            .map(|i| via_point(i as u32, i as f64, 0.0, 0.0))
            .collect();
        let mut edges = Vec::new();
        let add = |a: u32, b: u32, edges: &mut Vec<(u32, u32, f64, Bitset)>, rng: &mut dyn rand::RngCore| {
            let length = rng.random_range(1..20) as f64;
            let mut bits = Bitset::new(m);
            for k in 0..m {
                if rng.random::<f64>() < 0.25 {
                    bits.set(k, true);
                }
            }
            edges.push((a.min(b), a.max(b), length, bits));
        };
        // Random spanning tree keeps it connected.
        for i in 1..n_nodes as u32 {
            let j = rng.random_range(0..i);
            add(i, j, &mut edges, rng);
        }
        for _ in 0..extra_edges {
            let a = rng.random_range(0..n_nodes as u32);
            let b = rng.random_range(0..n_nodes as u32);
            if a != b {
                add(a, b, &mut edges, rng);
            }
        }
        PrimitiveCoverageGraph::from_parts(nodes, edges, m).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn degree_sequence_of_shared_node() {
        let nodes = vec![
            via_point(0, 0.0, 0.0, 0.0),
            via_point(1, 1.0, 0.0, 0.0),
            via_point(2, 2.0, 0.0, 0.0),
        ];
        let m = 4;
        let edges = vec![
            (0, 1, 1.0, bits_from(&[0], m)),
            (1, 2, 1.0, bits_from(&[1], m)),
        ];
        let g = PrimitiveCoverageGraph::from_parts(nodes, edges, m).unwrap();
        g.validate().unwrap();
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.degree(1), 2);
        assert_eq!(g.degree(2), 1);
    }

    #[test]
    fn no_primitives_gives_edgeless_graph() {
        let nodes = vec![via_point(0, 0.0, 0.0, 0.0), via_point(1, 1.0, 0.0, 0.0)];
        let g = PrimitiveCoverageGraph::from_parts(nodes, vec![], 4).unwrap();
        assert_eq!(g.edge_count(), 0);
        assert_eq!(g.node_count(), 2);
        let (_, ratio) = g.max_coverage();
        assert_eq!(ratio, 0.0);
    }

    #[test]
    fn duplicate_pair_keeps_shorter_edge() {
        let nodes = vec![via_point(0, 0.0, 0.0, 0.0), via_point(1, 1.0, 0.0, 0.0)];
        let m = 2;
        let edges = vec![
            (0, 1, 5.0, bits_from(&[0], m)),
            (1, 0, 2.0, bits_from(&[1], m)),
        ];
        let g = PrimitiveCoverageGraph::from_parts(nodes, edges, m).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.edge(0).length, 2.0);
        assert!(g.edge(0).visibility.get(1));
    }

    #[test]
    fn coverage_of_edge_sets() {
        let nodes = vec![
            via_point(0, 0.0, 0.0, 0.0),
            via_point(1, 1.0, 0.0, 0.0),
            via_point(2, 2.0, 0.0, 0.0),
        ];
        let m = 100;
        let ten: Vec<usize> = (0..10).collect();
        let five: Vec<usize> = (50..55).collect();
        let edges = vec![
            (0, 1, 1.0, bits_from(&ten, m)),
            (1, 2, 1.0, bits_from(&five, m)),
        ];
        let g = PrimitiveCoverageGraph::from_parts(nodes, edges, m).unwrap();

        let (_, empty) = g.coverage_of([]);
        assert_eq!(empty, 0.0);
        let (_, both) = g.coverage_of([0, 1]);
        assert!((both - 0.15).abs() < 1e-12);
        let (_, max) = g.max_coverage();
        assert_eq!(both, max);
    }

    #[test]
    fn shortest_walk_trivial_cases() {
        let nodes = vec![
            via_point(0, 0.0, 0.0, 0.0),
            via_point(1, 1.0, 0.0, 0.0),
            via_point(2, 2.0, 0.0, 0.0),
        ];
        let m = 1;
        let edges = vec![
            (0, 1, 1.0, bits_from(&[], m)),
            (1, 2, 2.0, bits_from(&[], m)),
        ];
        let g = PrimitiveCoverageGraph::from_parts(nodes, edges, m).unwrap();

        let (walk, cost) = g.shortest_walk(0, |n| n == 0).unwrap();
        assert!(walk.is_empty());
        assert_eq!(cost, 0.0);

        let (walk, cost) = g.shortest_walk(0, |n| n == 2).unwrap();
        assert_eq!(walk, vec![0, 1]);
        assert_eq!(cost, 3.0);

        // Unreachable predicate.
        assert!(g.shortest_walk(0, |_| false).is_none());
    }

    #[test]
    fn shortest_walk_matches_floyd_warshall_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..30 {
            let n = 8;
            let g = random_graph(&mut rng, n, 6, 4);

            // Brute-force all-pairs dynamic program.
            let mut dist = vec![vec![f64::INFINITY; n]; n];
            for i in 0..n {
                dist[i][i] = 0.0;
            }
            for e in g.edges() {
                let (i, j) = (e.i as usize, e.j as usize);
                dist[i][j] = dist[i][j].min(e.length);
                dist[j][i] = dist[j][i].min(e.length);
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let via = dist[i][k] + dist[k][j];
                        if via < dist[i][j] {
                            dist[i][j] = via;
                        }
                    }
                }
            }

            for from in 0..n as u32 {
                for to in 0..n as u32 {
                    let (walk, cost) = g.shortest_walk(from, |v| v == to).unwrap();
                    assert_eq!(cost, dist[from as usize][to as usize]);
                    // Walk actually connects from -> to with that cost.
                    let mut cursor = from;
                    let mut total = 0.0;
                    for eid in &walk {
                        let e = g.edge(*eid);
                        assert!(e.i == cursor || e.j == cursor);
                        cursor = e.other_end(cursor);
                        total += e.length;
                    }
                    assert_eq!(cursor, to);
                    assert_eq!(total, cost);
                }
            }
        }
    }

    #[test]
    fn coverage_is_monotone_and_submodular() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = random_graph(&mut rng, 10, 8, 32);
            let ids: Vec<u32> = g.edges().iter().map(|e| e.id).collect();
            if ids.len() < 3 {
                continue;
            }
            // A subset of B, and a probe edge e outside B.
            let mid = ids.len() / 2;
            let a_set = &ids[..mid / 2];
            let b_set = &ids[..mid];
            let probe = *ids.last().unwrap();

            let (cov_a, ra) = g.coverage_of(a_set.iter().copied());
            let (cov_b, rb) = g.coverage_of(b_set.iter().copied());
            assert!(rb >= ra, "monotone");
            assert!(cov_a.is_subset_of(&cov_b));

            let gain_a = g.edge(probe).visibility.count_new(&cov_a);
            let gain_b = g.edge(probe).visibility.count_new(&cov_b);
            assert!(gain_a >= gain_b, "submodular marginal gain");
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = random_graph(&mut rng, 12, 10, 50);
        let meta = PcgMeta {
            m: 50,
            mesh_hash: "abc123".into(),
            params: serde_json::json!({"seed": 7}),
        };
        let text = g.to_json(&meta).unwrap();
        let (back, meta2) = PrimitiveCoverageGraph::from_json(&text).unwrap();
        assert_eq!(meta2.mesh_hash, meta.mesh_hash);
        assert_eq!(back.node_count(), g.node_count());
        assert_eq!(back.edge_count(), g.edge_count());
        for (a, b) in g.edges().iter().zip(back.edges()) {
            assert_eq!(a.i, b.i);
            assert_eq!(a.j, b.j);
            assert_eq!(a.length, b.length); // exact float round-trip
            assert_eq!(a.visibility, b.visibility);
        }
        for (a, b) in g.nodes().iter().zip(back.nodes()) {
            assert_eq!(a.position, b.position);
            assert_eq!(a.direction, b.direction);
        }
        back.validate().unwrap();
    }
}
