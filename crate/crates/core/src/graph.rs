//! Multigraph sandpiles with a designated sink.
//!
//! A `SandpileGraph` doubles as a unit-conductance resistive network: every
//! edge slot is a unit resistor unless explicit conductances are attached.
//! Builders for the grid, honeycomb and triangular families live here, each
//! returning dense vertex ids with the sink as the last id.

use std::collections::BTreeMap;

use thiserror::Error;

pub type VertexId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph is disconnected (sink not reachable from vertex {0})")]
    DisconnectedGraph(VertexId),
    #[error("self loop at vertex {0}")]
    SelfLoop(VertexId),
    #[error("sink id {sink} out of range for {vertex_count} vertices")]
    BadSink { sink: VertexId, vertex_count: usize },
    #[error("vertex id {0} out of range")]
    BadVertex(VertexId),
    #[error("zero multiplicity on edge ({0}, {1})")]
    ZeroMultiplicity(VertexId, VertexId),
    #[error("conductance must be positive on edge ({0}, {1})")]
    BadConductance(VertexId, VertexId),
    #[error("isolated vertex {0}")]
    IsolatedVertex(VertexId),
}

/// One aggregated edge: `multiplicity` parallel unit slots between `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub multiplicity: u64,
    /// Electrical conductance; equals `multiplicity` unless overridden.
    pub conductance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandpileGraph {
    vertex_count: usize,
    sink: VertexId,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<(VertexId, u64)>>,
    degree: Vec<u64>,
}

impl SandpileGraph {
    /// Validates and builds a sandpile graph from aggregated edges.
    pub fn build(
        vertex_count: usize,
        sink: VertexId,
        edges: &[(VertexId, VertexId, u64)],
    ) -> Result<Self, GraphError> {
        if sink >= vertex_count {
            return Err(GraphError::BadSink { sink, vertex_count });
        }
        let mut merged: BTreeMap<(VertexId, VertexId), u64> = BTreeMap::new();
        for &(u, v, m) in edges {
            if u >= vertex_count {
                return Err(GraphError::BadVertex(u));
            }
            if v >= vertex_count {
                return Err(GraphError::BadVertex(v));
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if m == 0 {
                return Err(GraphError::ZeroMultiplicity(u, v));
            }
            *merged.entry((u.min(v), u.max(v))).or_insert(0) += m;
        }
        let edges: Vec<Edge> = merged
            .into_iter()
            .map(|((u, v), multiplicity)| Edge {
                u,
                v,
                multiplicity,
                conductance: multiplicity as f64,
            })
            .collect();
        let g = Self::assemble(vertex_count, sink, edges)?;
        g.check_connected()?;
        Ok(g)
    }

    fn assemble(
        vertex_count: usize,
        sink: VertexId,
        edges: Vec<Edge>,
    ) -> Result<Self, GraphError> {
        let mut neighbors = vec![Vec::new(); vertex_count];
        let mut degree = vec![0u64; vertex_count];
        for e in &edges {
            neighbors[e.u].push((e.v, e.multiplicity));
            neighbors[e.v].push((e.u, e.multiplicity));
            degree[e.u] += e.multiplicity;
            degree[e.v] += e.multiplicity;
        }
        for v in 0..vertex_count {
            if degree[v] == 0 {
                return Err(GraphError::IsolatedVertex(v));
            }
        }
        Ok(Self {
            vertex_count,
            sink,
            edges,
            neighbors,
            degree,
        })
    }

    fn check_connected(&self) -> Result<(), GraphError> {
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![self.sink];
        seen[self.sink] = true;
        while let Some(v) = stack.pop() {
            for &(u, _) in &self.neighbors[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(v) => Err(GraphError::DisconnectedGraph(v)),
            None => Ok(()),
        }
    }

    /// Replaces edge conductances. Order and length must match `edges()`.
    pub fn set_conductances(&mut self, conductances: &[f64]) -> Result<(), GraphError> {
        assert_eq!(conductances.len(), self.edges.len());
        for (e, &c) in self.edges.iter_mut().zip(conductances) {
            if !(c > 0.0) {
                return Err(GraphError::BadConductance(e.u, e.v));
            }
            e.conductance = c;
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn ordinary_count(&self) -> usize {
        self.vertex_count - 1
    }

    pub fn sink(&self) -> VertexId {
        self.sink
    }

    pub fn is_ordinary(&self, v: VertexId) -> bool {
        v < self.vertex_count && v != self.sink
    }

    pub fn ordinary_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.vertex_count).filter(move |&v| v != self.sink)
    }

    pub fn degree(&self, v: VertexId) -> u64 {
        self.degree[v]
    }

    /// Stable capacity of an ordinary vertex: one less than its degree.
    pub fn capacity(&self, v: VertexId) -> u64 {
        self.degree[v] - 1
    }

    pub fn neighbors(&self, v: VertexId) -> &[(VertexId, u64)] {
        &self.neighbors[v]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_multiplicity(&self, u: VertexId, v: VertexId) -> u64 {
        let (a, b) = (u.min(v), u.max(v));
        self.edges
            .binary_search_by_key(&(a, b), |e| (e.u, e.v))
            .map(|i| self.edges[i].multiplicity)
            .unwrap_or(0)
    }

    /// Conductance of the aggregated edge `{u, v}` (0 when absent).
    pub fn conductance(&self, u: VertexId, v: VertexId) -> f64 {
        let (a, b) = (u.min(v), u.max(v));
        self.edges
            .binary_search_by_key(&(a, b), |e| (e.u, e.v))
            .map(|i| self.edges[i].conductance)
            .unwrap_or(0.0)
    }

    /// Sum of conductances incident to `v`.
    pub fn weighted_degree(&self, v: VertexId) -> f64 {
        self.neighbors[v]
            .iter()
            .map(|&(u, _)| self.conductance(v, u))
            .sum()
    }

    pub fn total_edge_multiplicity(&self) -> u64 {
        self.edges.iter().map(|e| e.multiplicity).sum()
    }

    /// Multiplicity of the sink edge at `v` (0 when not sink-adjacent).
    pub fn sink_multiplicity(&self, v: VertexId) -> u64 {
        self.edge_multiplicity(v, self.sink)
    }

    pub fn sink_adjacent(&self) -> Vec<VertexId> {
        let mut out: Vec<VertexId> = self.neighbors[self.sink].iter().map(|&(u, _)| u).collect();
        out.sort_unstable();
        out
    }

    /// True iff the conductances are exactly the multiplicities, i.e. the
    /// graph is a legal integer sandpile network.
    pub fn is_unit_network(&self) -> bool {
        self.edges
            .iter()
            .all(|e| e.conductance == e.multiplicity as f64)
    }

    pub fn conductance_edges(&self) -> impl Iterator<Item = (VertexId, VertexId, f64)> + '_ {
        self.edges.iter().map(|e| (e.u, e.v, e.conductance))
    }

    /// True iff the induced subgraph on ordinary vertices is connected.
    /// Finite transience class requires this.
    pub fn ordinary_connected(&self) -> bool {
        let Some(start) = self.ordinary_vertices().next() else {
            return true;
        };
        let mut seen = vec![false; self.vertex_count];
        seen[start] = true;
        let mut stack = vec![start];
        let mut count = 1usize;
        while let Some(v) = stack.pop() {
            for &(u, _) in &self.neighbors[v] {
                if u != self.sink && !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.ordinary_count()
    }

    /// Full combinatorial Laplacian `D - A` with conductance weights.
    pub fn laplacian(&self) -> nalgebra::DMatrix<f64> {
        let n = self.vertex_count;
        let mut l = nalgebra::DMatrix::zeros(n, n);
        for e in &self.edges {
            l[(e.u, e.u)] += e.conductance;
            l[(e.v, e.v)] += e.conductance;
            l[(e.u, e.v)] -= e.conductance;
            l[(e.v, e.u)] -= e.conductance;
        }
        l
    }

    /// Principal minor with the sink row and column removed; symmetric
    /// positive definite for connected graphs. Rows follow ordinary vertices
    /// in id order.
    pub fn grounded_laplacian(&self) -> nalgebra::DMatrix<f64> {
        let pos = reduced_index(self.vertex_count, self.sink);
        let m = self.ordinary_count();
        let mut l = nalgebra::DMatrix::zeros(m, m);
        for e in &self.edges {
            if let Some(i) = pos[e.u] {
                l[(i, i)] += e.conductance;
            }
            if let Some(j) = pos[e.v] {
                l[(j, j)] += e.conductance;
            }
            if let (Some(i), Some(j)) = (pos[e.u], pos[e.v]) {
                l[(i, j)] -= e.conductance;
                l[(j, i)] -= e.conductance;
            }
        }
        l
    }
}

/// Map vertex id -> index with `skip` removed, preserving order.
pub fn reduced_index(vertex_count: usize, skip: VertexId) -> Vec<Option<usize>> {
    let mut pos = vec![None; vertex_count];
    let mut k = 0;
    for v in 0..vertex_count {
        if v != skip {
            pos[v] = Some(k);
            k += 1;
        }
    }
    pos
}

/// `build_graph` with the sink inferred as the largest id plus validation;
/// mirrors the builder entry point used by the CLI.
pub fn build_graph(
    edges: &[(VertexId, VertexId, u64)],
    sink: VertexId,
) -> Result<SandpileGraph, GraphError> {
    let vertex_count = edges
        .iter()
        .flat_map(|&(u, v, _)| [u, v])
        .chain(std::iter::once(sink))
        .max()
        .map_or(0, |m| m + 1);
    SandpileGraph::build(vertex_count, sink, edges)
}

/// Row-major vertex id for grid label `(i, j)`, `1 <= i, j <= n`.
pub fn grid_vertex(n: usize, i: usize, j: usize) -> VertexId {
    debug_assert!((1..=n).contains(&i) && (1..=n).contains(&j));
    (i - 1) * n + (j - 1)
}

/// `GRID_n`: the n-by-n grid sandpile. Every ordinary vertex has degree 4;
/// non-corner boundary vertices get a single sink edge and corners a double
/// one. The sink is the last id, `n * n`.
pub fn grid(n: usize) -> SandpileGraph {
    assert!(n >= 2, "grid size must be at least 2");
    let sink = n * n;
    let mut edges = Vec::new();
    for i in 1..=n {
        for j in 1..=n {
            let v = grid_vertex(n, i, j);
            if i < n {
                edges.push((v, grid_vertex(n, i + 1, j), 1));
            }
            if j < n {
                edges.push((v, grid_vertex(n, i, j + 1), 1));
            }
            let missing = [i == 1, i == n, j == 1, j == n]
                .iter()
                .filter(|&&b| b)
                .count() as u64;
            if missing > 0 {
                edges.push((v, sink, missing));
            }
        }
    }
    SandpileGraph::build(n * n + 1, sink, &edges).expect("grid is always valid")
}

/// A finite lattice patch plus the metadata the reductions need.
#[derive(Debug, Clone)]
pub struct LatticePatch {
    pub graph: SandpileGraph,
    /// Planar coordinates per vertex (sink excluded).
    pub coords: Vec<(f64, f64)>,
    /// Degree-3 star centers eliminated by the honeycomb reduction
    /// (empty for the triangular family).
    pub star_centers: Vec<VertexId>,
    /// Full lattice degree every vertex was completed to via sink edges.
    pub lattice_degree: u64,
}

fn dedup_vertices(points: &[(f64, f64)]) -> (Vec<(f64, f64)>, Vec<usize>) {
    let mut key2id: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut coords = Vec::new();
    let mut ids = Vec::with_capacity(points.len());
    for &(x, y) in points {
        let key = ((x * 1e6).round() as i64, (y * 1e6).round() as i64);
        let id = *key2id.entry(key).or_insert_with(|| {
            coords.push((x, y));
            coords.len() - 1
        });
        ids.push(id);
    }
    (coords, ids)
}

/// Axial coordinates of hexagon cells within `rings` rings of a centre cell.
fn hex_cells(rings: usize) -> Vec<(i64, i64)> {
    let nn = rings as i64;
    let mut cells = Vec::new();
    for q in -nn..=nn {
        for r in -nn..=nn {
            if (q + r).abs() <= nn {
                cells.push((q, r));
            }
        }
    }
    cells
}

/// Honeycomb patch of `n` rings of hexagonal cells. Every vertex is brought
/// to lattice degree 3 with sink edges on the missing boundary slots.
pub fn honeycomb(n: usize) -> LatticePatch {
    assert!(n >= 1);
    let s3 = 3.0f64.sqrt();
    let mut corners = Vec::new();
    let mut cell_corner_count = Vec::new();
    for &(q, r) in &hex_cells(n - 1) {
        let cx = s3 * (q as f64 + r as f64 / 2.0);
        let cy = 1.5 * r as f64;
        for k in 0..6 {
            let ang = std::f64::consts::FRAC_PI_6 + k as f64 * std::f64::consts::FRAC_PI_3;
            corners.push((cx + ang.cos(), cy + ang.sin()));
        }
        cell_corner_count.push(6);
    }
    let (coords, ids) = dedup_vertices(&corners);
    let nv = coords.len();
    let mut edge_set: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut at = 0;
    for &cnt in &cell_corner_count {
        for k in 0..cnt {
            let a = ids[at + k];
            let b = ids[at + (k + 1) % cnt];
            edge_set.insert((a.min(b), a.max(b)), 1);
        }
        at += cnt;
    }
    finish_patch(nv, coords, edge_set, 3)
}

/// Triangular patch: all lattice points within hex distance `n` of a centre
/// vertex, completed to lattice degree 6 with sink edges.
pub fn triangular(n: usize) -> LatticePatch {
    assert!(n >= 1);
    let nn = n as i64;
    let s3 = 3.0f64.sqrt();
    let mut pts = Vec::new();
    let mut axial = Vec::new();
    for q in -nn..=nn {
        for r in -nn..=nn {
            if (q + r).abs() <= nn {
                axial.push((q, r));
                pts.push((s3 * (q as f64 + r as f64 / 2.0), 1.5 * r as f64));
            }
        }
    }
    let (coords, ids) = dedup_vertices(&pts);
    let nv = coords.len();
    let index: BTreeMap<(i64, i64), usize> = axial
        .iter()
        .enumerate()
        .map(|(k, &qr)| (qr, ids[k]))
        .collect();
    let mut edge_set: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for &(q, r) in &axial {
        let a = index[&(q, r)];
        for (dq, dr) in [(1, 0), (0, 1), (1, -1)] {
            if let Some(&b) = index.get(&(q + dq, r + dr)) {
                edge_set.insert((a.min(b), a.max(b)), 1);
            }
        }
    }
    finish_patch(nv, coords, edge_set, 6)
}

fn finish_patch(
    nv: usize,
    coords: Vec<(f64, f64)>,
    edge_set: BTreeMap<(usize, usize), u64>,
    lattice_degree: u64,
) -> LatticePatch {
    let sink = nv;
    let mut lattice_deg = vec![0u64; nv];
    let mut edges: Vec<(usize, usize, u64)> = Vec::new();
    for (&(a, b), &m) in &edge_set {
        lattice_deg[a] += m;
        lattice_deg[b] += m;
        edges.push((a, b, m));
    }
    for v in 0..nv {
        if lattice_deg[v] < lattice_degree {
            edges.push((v, sink, lattice_degree - lattice_deg[v]));
        }
    }
    let graph = SandpileGraph::build(nv + 1, sink, &edges).expect("lattice patch is valid");
    // star centers: one bipartition class, interior-order deterministic
    let star_centers = two_color_class(&graph, nv);
    LatticePatch {
        graph,
        coords,
        star_centers,
        lattice_degree,
    }
}

/// One class of the 2-coloring of the non-sink subgraph (empty when the
/// subgraph is not bipartite, as for the triangular lattice).
fn two_color_class(g: &SandpileGraph, nv: usize) -> Vec<VertexId> {
    let mut color = vec![-1i8; nv];
    for start in 0..nv {
        if color[start] != -1 {
            continue;
        }
        color[start] = 0;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for &(u, _) in g.neighbors(v) {
                if u >= nv {
                    continue;
                }
                if color[u] == -1 {
                    color[u] = 1 - color[v];
                    stack.push(u);
                } else if color[u] == color[v] {
                    return Vec::new();
                }
            }
        }
    }
    (0..nv).filter(|&v| color[v] == 1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_legal_sandpile() {
        let g = build_graph(&[(0, 1, 1)], 1).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.degree(0), 1);
        assert_eq!(g.sink(), 1);
    }

    #[test]
    fn multiedge_degree() {
        let g = build_graph(&[(0, 1, 2)], 1).unwrap();
        assert_eq!(g.degree(0), 2);
        assert_eq!(g.edge_multiplicity(0, 1), 2);
    }

    #[test]
    fn disconnected_rejected() {
        // 4-cycle neither touching the sink vertex 4
        let err = SandpileGraph::build(5, 4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 0, 1)]);
        assert!(matches!(
            err,
            Err(GraphError::DisconnectedGraph(_)) | Err(GraphError::IsolatedVertex(_))
        ));
    }

    #[test]
    fn self_loop_rejected() {
        assert_eq!(
            build_graph(&[(0, 0, 1), (0, 1, 1)], 1),
            Err(GraphError::SelfLoop(0))
        );
    }

    #[test]
    fn ordinary_connectivity() {
        // path a - s - b: sink separates
        let g = SandpileGraph::build(3, 1, &[(0, 1, 1), (1, 2, 1)]).unwrap();
        assert!(!g.ordinary_connected());
        assert!(grid(4).ordinary_connected());
        // two triangles sharing only the sink
        let s = 4;
        let g = SandpileGraph::build(
            5,
            s,
            &[(0, 1, 1), (0, s, 1), (1, s, 1), (2, 3, 1), (2, s, 1), (3, s, 1)],
        )
        .unwrap();
        assert!(!g.ordinary_connected());
    }

    #[test]
    fn grid_2_shape() {
        let g = grid(2);
        assert_eq!(g.ordinary_count(), 4);
        for v in g.ordinary_vertices() {
            assert_eq!(g.degree(v), 4);
        }
        assert_eq!(g.degree(g.sink()), 8);
    }

    #[test]
    fn grid_3_center_has_no_sink_edge() {
        let g = grid(3);
        assert_eq!(g.sink_multiplicity(grid_vertex(3, 2, 2)), 0);
    }

    #[test]
    fn grid_4_edge_counts() {
        let g = grid(4);
        let internal: u64 = g
            .edges()
            .iter()
            .filter(|e| e.v != g.sink())
            .map(|e| e.multiplicity)
            .sum();
        let to_sink: u64 = g
            .edges()
            .iter()
            .filter(|e| e.v == g.sink())
            .map(|e| e.multiplicity)
            .sum();
        assert_eq!(internal, 2 * 4 * 3); // 2n(n-1)
        assert_eq!(to_sink, 16); // 4n
    }

    #[test]
    fn grid_degree_regular_up_to_32() {
        for n in [2usize, 5, 9, 16, 32] {
            let g = grid(n);
            assert!(g.ordinary_vertices().all(|v| g.degree(v) == 4));
        }
    }

    #[test]
    fn degree_sum_is_twice_multiplicity() {
        for g in [grid(3), honeycomb(2).graph, triangular(2).graph] {
            let degsum: u64 = (0..g.vertex_count()).map(|v| g.degree(v)).sum();
            assert_eq!(degsum, 2 * g.total_edge_multiplicity());
        }
    }

    #[test]
    fn grounded_laplacian_small() {
        let g = build_graph(&[(0, 1, 1)], 1).unwrap();
        let l = g.grounded_laplacian();
        assert_eq!(l[(0, 0)], 1.0);

        // path 0 - 1 - s
        let g = SandpileGraph::build(3, 2, &[(0, 1, 1), (1, 2, 1)]).unwrap();
        let l = g.grounded_laplacian();
        assert_eq!(l[(0, 0)], 1.0);
        assert_eq!(l[(0, 1)], -1.0);
        assert_eq!(l[(1, 0)], -1.0);
        assert_eq!(l[(1, 1)], 2.0);
    }

    #[test]
    fn grid_2_grounded_diagonal() {
        let l = grid(2).grounded_laplacian();
        for i in 0..4 {
            assert_eq!(l[(i, i)], 4.0);
        }
    }

    #[test]
    fn grounded_laplacian_positive_definite() {
        for g in [
            grid(3),
            grid(5),
            honeycomb(1).graph,
            honeycomb(2).graph,
            triangular(1).graph,
            triangular(2).graph,
        ] {
            let l = g.grounded_laplacian();
            assert!(
                nalgebra::Cholesky::new(l).is_some(),
                "grounded Laplacian must be SPD"
            );
        }
    }

    #[test]
    fn honeycomb_shapes() {
        let h1 = honeycomb(1);
        assert_eq!(h1.graph.ordinary_count(), 6);
        for v in h1.graph.ordinary_vertices() {
            assert_eq!(h1.graph.degree(v), 3);
        }
        let h2 = honeycomb(2);
        assert_eq!(h2.graph.ordinary_count(), 24);
        assert!(h2.graph.ordinary_vertices().all(|v| h2.graph.degree(v) == 3));
        // interior vertices carry no sink edge
        assert!(h2
            .graph
            .ordinary_vertices()
            .any(|v| h2.graph.sink_multiplicity(v) == 0));
        // bipartition class covers half the vertices
        assert_eq!(h2.star_centers.len(), 12);
    }

    #[test]
    fn triangular_shapes() {
        let t1 = triangular(1);
        assert_eq!(t1.graph.ordinary_count(), 7);
        assert!(t1.graph.ordinary_vertices().all(|v| t1.graph.degree(v) == 6));
        assert!(t1.star_centers.is_empty()); // not bipartite
        let t2 = triangular(2);
        assert!(t2.graph.ordinary_vertices().all(|v| t2.graph.degree(v) == 6));
    }
}
