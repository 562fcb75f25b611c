//! Network-equivalence machinery: star-delta elimination, the
//! honeycomb-to-triangular reduction, contract/delete monotone reduction,
//! and the k-sink line-circuit bounds.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use thiserror::Error;

use crate::graph::{LatticePatch, SandpileGraph, VertexId};
use crate::solver::{solve_dirichlet, SolveError};

#[derive(Debug, Error, PartialEq)]
pub enum ReduceError {
    #[error("center {0} does not have exactly three neighbours")]
    NotDegreeThree(VertexId),
    #[error("center {0} lies in the protected boundary set")]
    CenterIsCritical(VertexId),
    #[error("boundary sets do not match between the networks")]
    BoundaryMismatch,
    #[error("deleting this edge disconnects the poles in the sinkless graph")]
    WouldDisconnect,
    #[error("contracting this edge would merge the poles")]
    WouldMergePoles,
    #[error("edge ({0}, {1}) is not present")]
    NoSuchEdge(VertexId, VertexId),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Resistor network over dense vertex ids with a designated sink and a
/// protected boundary set (defaults to the sink-adjacent vertices).
/// Vertices may disappear during reductions; adjacency is the source of
/// truth for existence.
#[derive(Debug, Clone)]
pub struct ResistiveNetwork {
    vertex_count: usize,
    sink: VertexId,
    resistances: BTreeMap<(VertexId, VertexId), f64>,
    boundary: BTreeSet<VertexId>,
}

impl ResistiveNetwork {
    pub fn from_sandpile(g: &SandpileGraph) -> Self {
        let mut resistances = BTreeMap::new();
        for (u, v, c) in g.conductance_edges() {
            resistances.insert((u, v), 1.0 / c);
        }
        let boundary = g.sink_adjacent().into_iter().collect();
        Self {
            vertex_count: g.vertex_count(),
            sink: g.sink(),
            resistances,
            boundary,
        }
    }

    pub fn with_boundary(mut self, boundary: BTreeSet<VertexId>) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn sink(&self) -> VertexId {
        self.sink
    }

    pub fn boundary(&self) -> &BTreeSet<VertexId> {
        &self.boundary
    }

    pub fn resistances(&self) -> &BTreeMap<(VertexId, VertexId), f64> {
        &self.resistances
    }

    pub fn resistance(&self, u: VertexId, v: VertexId) -> Option<f64> {
        self.resistances.get(&(u.min(v), u.max(v))).copied()
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.resistances.keys().any(|&(a, b)| a == v || b == v)
    }

    pub fn neighbors_of(&self, v: VertexId) -> Vec<(VertexId, f64)> {
        let mut out = Vec::new();
        for (&(a, b), &r) in &self.resistances {
            if a == v {
                out.push((b, r));
            } else if b == v {
                out.push((a, r));
            }
        }
        out
    }

    /// Merge `r` in parallel onto the pair `{u, v}`.
    fn add_parallel(&mut self, u: VertexId, v: VertexId, r: f64) {
        let key = (u.min(v), u.max(v));
        match self.resistances.get_mut(&key) {
            Some(existing) => *existing = 1.0 / (1.0 / *existing + 1.0 / r),
            None => {
                self.resistances.insert(key, r);
            }
        }
    }

    fn conductance_edges(&self) -> Vec<(VertexId, VertexId, f64)> {
        self.resistances
            .iter()
            .map(|(&(u, v), &r)| (u, v, 1.0 / r))
            .collect()
    }

    /// Potentials with `source` clamped to 1 and the sink grounded.
    /// Vertices eliminated by reductions are clamped to 0 so the free
    /// system stays nonsingular.
    pub fn unit_response(&self, source: VertexId) -> Result<Vec<f64>, ReduceError> {
        let edges = self.conductance_edges();
        let mut exists = vec![false; self.vertex_count];
        for &(u, v) in self.resistances.keys() {
            exists[u] = true;
            exists[v] = true;
        }
        let mut clamps = vec![(source, 1.0), (self.sink, 0.0)];
        for v in 0..self.vertex_count {
            if !exists[v] && v != source && v != self.sink {
                clamps.push((v, 0.0));
            }
        }
        Ok(solve_dirichlet(self.vertex_count, &edges, &clamps)?)
    }

    /// Potential at `target` with unit potential at `source`, sink grounded.
    pub fn pole_potential(&self, source: VertexId, target: VertexId) -> Result<f64, ReduceError> {
        Ok(self.unit_response(source)?[target])
    }
}

/// Star-delta: eliminate a degree-3 `center`, installing
/// `A = (ab + bc + ca) / a` across the pair opposite arm `a` (and likewise
/// `B`, `C`), merging in parallel with existing resistors.
pub fn star_delta(
    net: &ResistiveNetwork,
    center: VertexId,
) -> Result<ResistiveNetwork, ReduceError> {
    if center == net.sink || net.boundary.contains(&center) {
        return Err(ReduceError::CenterIsCritical(center));
    }
    let arms = net.neighbors_of(center);
    if arms.len() != 3 {
        return Err(ReduceError::NotDegreeThree(center));
    }
    let (x, a) = arms[0];
    let (y, b) = arms[1];
    let (z, c) = arms[2];
    let s = a * b + b * c + c * a;
    let mut out = net.clone();
    for &(u, _) in &arms {
        out.resistances.remove(&(center.min(u), center.max(u)));
    }
    out.add_parallel(y, z, s / a);
    out.add_parallel(x, z, s / b);
    out.add_parallel(x, y, s / c);
    Ok(out)
}

/// Network equivalence on a shared boundary set: for every boundary vertex
/// as a unit-potential source, boundary potentials agree within `tol`.
pub fn check_equivalence(
    net1: &ResistiveNetwork,
    net2: &ResistiveNetwork,
    boundary: &BTreeSet<VertexId>,
    tol: f64,
) -> Result<bool, ReduceError> {
    for &v in boundary {
        if !net1.contains_vertex(v) || !net2.contains_vertex(v) {
            return Err(ReduceError::BoundaryMismatch);
        }
    }
    for &src in boundary {
        let p1 = net1.unit_response(src)?;
        let p2 = net2.unit_response(src)?;
        for &v in boundary {
            if (p1[v] - p2[v]).abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone)]
pub struct HoneycombReduction {
    pub honeycomb: ResistiveNetwork,
    pub triangular: ResistiveNetwork,
    /// Boundary set the equivalence was certified on.
    pub certified_boundary: BTreeSet<VertexId>,
    pub equivalent: bool,
    /// Distinct resistance values in the reduced network, sorted.
    pub reduced_resistances: Vec<f64>,
}

/// Eliminate every star center of a honeycomb patch (one bipartition class;
/// sink arms participate as ordinary star arms), producing the equivalent
/// triangular-lattice network. Equivalence is certified with
/// `check_equivalence` at tolerance `tol` on the reduced network's
/// sink-adjacent surviving vertices.
pub fn honeycomb_to_triangular(
    patch: &LatticePatch,
    tol: f64,
) -> Result<HoneycombReduction, ReduceError> {
    let eliminate: BTreeSet<VertexId> = patch.star_centers.iter().copied().collect();
    let keep_boundary: BTreeSet<VertexId> = patch
        .graph
        .sink_adjacent()
        .into_iter()
        .filter(|v| !eliminate.contains(v))
        .collect();
    let base = ResistiveNetwork::from_sandpile(&patch.graph).with_boundary(keep_boundary);
    let mut reduced = base.clone();
    for &w in &patch.star_centers {
        reduced = star_delta(&reduced, w)?;
    }
    // certify on the reduced network's sink-adjacent vertices
    let sink = reduced.sink;
    let certified_boundary: BTreeSet<VertexId> = reduced
        .neighbors_of(sink)
        .into_iter()
        .map(|(v, _)| v)
        .collect();
    let equivalent = check_equivalence(&base, &reduced, &certified_boundary, tol)?;
    let mut vals: Vec<f64> = reduced.resistances.values().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    Ok(HoneycombReduction {
        honeycomb: base,
        triangular: reduced,
        certified_boundary,
        equivalent,
        reduced_resistances: vals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    Contracted,
    Deleted,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub net: ResistiveNetwork,
    pub action: StepAction,
    pub pole_potential_before: f64,
    pub pole_potential_after: f64,
}

fn connected_without_sink(
    net: &ResistiveNetwork,
    skip_edge: Option<(VertexId, VertexId)>,
    vi: VertexId,
    vj: VertexId,
) -> bool {
    let mut adj: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
    for &(a, b) in net.resistances.keys() {
        if a == net.sink || b == net.sink {
            continue;
        }
        if skip_edge == Some((a, b)) {
            continue;
        }
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut seen = BTreeSet::from([vi]);
    let mut stack = vec![vi];
    while let Some(v) = stack.pop() {
        if let Some(nb) = adj.get(&v) {
            for &u in nb {
                if seen.insert(u) {
                    stack.push(u);
                }
            }
        }
    }
    seen.contains(&vj)
}

fn contract_edge(
    net: &ResistiveNetwork,
    a: VertexId,
    b: VertexId,
    vi: VertexId,
    vj: VertexId,
) -> ResistiveNetwork {
    // keep pole/sink labels sticky, otherwise the smaller id
    let keep = if a == net.sink || a == vi || a == vj {
        a
    } else if b == net.sink || b == vi || b == vj {
        b
    } else {
        a.min(b)
    };
    let gone = if keep == a { b } else { a };
    let mut out = net.clone();
    out.resistances.remove(&(a.min(b), a.max(b)));
    let moved: Vec<(VertexId, f64)> = out
        .neighbors_of(gone)
        .into_iter()
        .collect();
    for (u, r) in moved {
        out.resistances.remove(&(gone.min(u), gone.max(u)));
        if u != keep {
            out.add_parallel(keep, u, r);
        }
    }
    out
}

/// One monotone reduction step on edge `e = (a, b)` of `net - {sink}`:
/// solves both the contraction and the deletion and keeps whichever lowers
/// `pi_{vi}(vj)`; ties go to deletion.
pub fn contract_delete_step(
    net: &ResistiveNetwork,
    vi: VertexId,
    vj: VertexId,
    e: (VertexId, VertexId),
) -> Result<StepOutcome, ReduceError> {
    let (a, b) = (e.0.min(e.1), e.0.max(e.1));
    if net.resistance(a, b).is_none() {
        return Err(ReduceError::NoSuchEdge(a, b));
    }
    if a == net.sink || b == net.sink {
        return Err(ReduceError::NoSuchEdge(a, b));
    }
    if (a == vi && b == vj) || (a == vj && b == vi) {
        return Err(ReduceError::WouldMergePoles);
    }
    if !connected_without_sink(net, Some((a, b)), vi, vj) {
        return Err(ReduceError::WouldDisconnect);
    }
    let before = net.pole_potential(vi, vj)?;
    let mut deleted = net.clone();
    deleted.resistances.remove(&(a, b));
    let contracted = contract_edge(net, a, b, vi, vj);
    let p_del = deleted.pole_potential(vi, vj)?;
    let keep_vertex = if contracted.contains_vertex(vj) { vj } else { vi };
    let _ = keep_vertex;
    let p_con = contracted.pole_potential(vi, vj)?;
    let (net2, action, after) = if p_con < p_del - 1e-12 {
        (contracted, StepAction::Contracted, p_con)
    } else {
        (deleted, StepAction::Deleted, p_del)
    };
    debug_assert!(
        after <= before + 1e-9,
        "contract/delete must not increase the pole potential"
    );
    Ok(StepOutcome {
        net: net2,
        action,
        pole_potential_before: before,
        pole_potential_after: after,
    })
}

/// Iterate `contract_delete_step` to its fixpoint: edges are picked in
/// lexicographic order; the result's sinkless part is a path from `vi` to
/// `vj`.
pub fn reduce_to_line(
    net: &ResistiveNetwork,
    vi: VertexId,
    vj: VertexId,
) -> Result<(ResistiveNetwork, Vec<StepAction>), ReduceError> {
    let mut cur = net.clone();
    let mut actions = Vec::new();
    loop {
        let candidates: Vec<(VertexId, VertexId)> = cur
            .resistances
            .keys()
            .copied()
            .filter(|&(a, b)| a != cur.sink && b != cur.sink)
            .collect();
        let mut progressed = false;
        for e in candidates {
            match contract_delete_step(&cur, vi, vj, e) {
                Ok(step) => {
                    cur = step.net;
                    actions.push(step.action);
                    progressed = true;
                    break;
                }
                Err(ReduceError::WouldDisconnect) | Err(ReduceError::WouldMergePoles) => continue,
                Err(other) => return Err(other),
            }
        }
        if !progressed {
            return Ok((cur, actions));
        }
    }
}

/// Exact backward recursion for the line circuit:
/// `V_k = 1`, `V_{k-1} = x + 1`, `V_i = (x + 2) V_{i+1} - V_{i+2}`.
pub fn line_circuit_potentials(k: usize, x: i64) -> Vec<BigInt> {
    assert!(k >= 2);
    let mut v = vec![BigInt::from(0); k + 1];
    v[k] = BigInt::from(1);
    v[k - 1] = BigInt::from(x + 1);
    for i in (1..k.saturating_sub(1)).rev() {
        v[i] = (BigInt::from(x) + 2) * &v[i + 1] - &v[i + 2];
    }
    v.remove(0);
    v
}

/// `[[x+2, -1], [1, 0]]^(k-2) * (x+1, 1)`: the matrix-power form of the
/// same recursion, exact.
pub fn line_circuit_matrix_power(k: usize, x: i64) -> (BigInt, BigInt) {
    assert!(k >= 2);
    let mut v = (BigInt::from(x + 1), BigInt::from(1));
    for _ in 0..k - 2 {
        let top = (BigInt::from(x) + 2) * &v.0 - &v.1;
        v = (top, v.0);
    }
    v
}

#[derive(Debug, Clone)]
pub struct KsinkBound {
    /// Exact `V_1` from the recursion.
    pub exact: BigInt,
    /// Envelope `(x + 2)^(k-2) (x + 1)`.
    pub envelope: BigInt,
    /// Transience-class bound `|E| * envelope`.
    pub tcl_bound: BigInt,
}

/// Bounds for a sandpile with `e_count` edges and `k` sink connections; the
/// inter-node resistance of the reduced line circuit is `x = e_count - k`.
pub fn ksink_bound(e_count: u64, k: usize) -> KsinkBound {
    assert!(k >= 2 && e_count as usize >= k);
    let x = (e_count - k as u64) as i64;
    let exact = line_circuit_potentials(k, x)[0].clone();
    let envelope = (BigInt::from(x) + 2i64).pow((k - 2) as u32) * (BigInt::from(x) + 1i64);
    let tcl_bound = BigInt::from(e_count) * &envelope;
    assert!(exact <= envelope, "recursion exceeds its envelope");
    KsinkBound {
        exact,
        envelope,
        tcl_bound,
    }
}

/// The line sandpile with `k` ordinary vertices: a path with one unit sink
/// edge per vertex; matches the reduced circuit topology at `x = 2`.
pub fn line_sandpile(k: usize) -> SandpileGraph {
    assert!(k >= 2);
    let sink = k;
    let mut edges: Vec<(usize, usize, u64)> = (0..k - 1).map(|i| (i, i + 1, 1)).collect();
    edges.extend((0..k).map(|i| (i, sink, 1)));
    SandpileGraph::build(k + 1, sink, &edges).expect("line sandpile is valid")
}

#[derive(Debug, Clone)]
pub struct LineGrowthRow {
    pub k: usize,
    pub exact_impedance: u64,
    pub analytic_v1: f64,
}

/// Exact end-to-end impedance of the line sandpile against the analytic
/// x = 2 line-circuit value, for `k = 2..=k_max`.
pub fn line_sandpile_exponential_check(k_max: usize) -> Vec<LineGrowthRow> {
    use crate::engine::sandpile_impedance_exact;
    let mut rows = Vec::new();
    for k in 2..=k_max {
        let g = line_sandpile(k);
        let exact = sandpile_impedance_exact(&g, 0, k - 1)
            .expect("line sandpile is ordinary-connected")
            .finite()
            .expect("finite on a connected line");
        let analytic: f64 = line_circuit_potentials(k, 2)[0]
            .to_string()
            .parse()
            .unwrap();
        rows.push(LineGrowthRow {
            k,
            exact_impedance: exact,
            analytic_v1: analytic,
        });
    }
    rows
}
