//! Planar duals, restricted duals, and current computations.
//!
//! The dual has one vertex per face and one edge per primal slot. Removing
//! the dual of a power edge and attaching a unit current source across its
//! endpoints gives the restricted dual; currents there equal potential
//! differences in the primal circuit, which is what `planar_tcl_bound`
//! exploits. Currents are computed two independent ways: a grounded direct
//! solve of `LZ = I` and the spectral formula over the full Laplacian with
//! the zero mode deflated (the paper's epsilon-regularization limit).

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::embedding::{EmbeddedCircuit, PlanarEmbedding, SlotId};
use crate::graph::{SandpileGraph, VertexId};
use crate::harmonic::Harmonic;
use crate::solver::{solve_dirichlet, Grounded, SolveError};

#[derive(Debug, Error, PartialEq)]
pub enum DualError {
    #[error("embedding fails Euler's formula; not a planar embedding")]
    NonPlanarEmbedding,
    #[error("removing this dual edge disconnects the dual (primal bridge)")]
    Disconnecting,
    #[error("slot {0} is not a sink-incident boundary edge")]
    NotBoundaryEdge(SlotId),
    #[error("vertices {0} and {1} are not adjacent in the dual")]
    NotAdjacent(usize, usize),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Dual multigraph over faces; edge `k` crosses primal slot `k`.
#[derive(Debug, Clone)]
pub struct DualGraph {
    pub face_count: usize,
    /// Per primal slot: the two faces it separates (loops possible for
    /// primal bridges).
    pub edges: Vec<(usize, usize)>,
    /// Dual conductance per edge: reciprocal of the primal slot conductance.
    pub conductance: Vec<f64>,
}

impl DualGraph {
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// Faces of the embedding become vertices; each primal slot crosses into
/// exactly one dual edge.
pub fn dualize(circuit: &EmbeddedCircuit) -> DualGraph {
    let emb = &circuit.embedding;
    let edges = (0..emb.slot_count())
        .map(|s| (emb.face_of(2 * s), emb.face_of(2 * s + 1)))
        .collect();
    DualGraph {
        face_count: emb.faces().len(),
        edges,
        conductance: circuit.conductance.iter().map(|c| 1.0 / c).collect(),
    }
}

/// The dual with the power edge's dual removed and a unit current source
/// attached across its endpoints.
#[derive(Debug, Clone)]
pub struct RestrictedDual {
    pub dual: DualGraph,
    pub removed_slot: SlotId,
    /// Current source face.
    pub source: usize,
    /// Current sink face.
    pub sink: usize,
}

pub fn restricted_dual(
    circuit: &EmbeddedCircuit,
    power_slot: SlotId,
) -> Result<RestrictedDual, DualError> {
    let dual = dualize(circuit);
    let (u, v) = dual.edges[power_slot];
    if u == v {
        return Err(DualError::Disconnecting);
    }
    // connectivity of dual minus the removed edge
    let n = dual.face_count;
    let mut adj = vec![Vec::new(); n];
    for (k, &(a, b)) in dual.edges.iter().enumerate() {
        if k != power_slot && a != b {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(DualError::Disconnecting);
    }
    Ok(RestrictedDual {
        dual,
        removed_slot: power_slot,
        source: u,
        sink: v,
    })
}

impl RestrictedDual {
    fn live_edges(&self) -> impl Iterator<Item = (usize, (usize, usize), f64)> + '_ {
        self.dual
            .edges
            .iter()
            .enumerate()
            .filter(move |&(k, &(a, b))| k != self.removed_slot && a != b)
            .map(|(k, &(a, b))| (k, (a, b), self.dual.conductance[k]))
    }

    /// Node potentials `Z` from the grounded direct solve of `LZ = I` with
    /// unit current injected at the source face and drawn from the sink face.
    pub fn direct_potentials(&self) -> Result<Vec<f64>, DualError> {
        let grounded = Grounded::new(
            self.dual.face_count,
            self.sink,
            self.live_edges().map(|(_, (a, b), c)| (a, b, c)),
        )?;
        let mut b = vec![0.0; self.dual.face_count];
        b[self.source] = 1.0;
        Ok(grounded.solve_injection(&b))
    }

    /// Spectral decomposition of the full (singular) Laplacian of the
    /// restricted dual.
    pub fn spectral(&self) -> SpectralDecomposition {
        let n = self.dual.face_count;
        let mut l = DMatrix::zeros(n, n);
        for (_, (a, b), c) in self.live_edges() {
            l[(a, a)] += c;
            l[(b, b)] += c;
            l[(a, b)] -= c;
            l[(b, a)] -= c;
        }
        SpectralDecomposition::new(l)
    }
}

/// Eigen pairs of a Laplacian, sorted ascending; `lambda_0 = 0` with the
/// constant eigenvector.
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column k is the eigenvector of `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn new(l: DMatrix<f64>) -> Self {
        let n = l.nrows();
        let sym = SymmetricEigen::new(l);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| sym.eigenvalues[i].partial_cmp(&sym.eigenvalues[j]).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&i| sym.eigenvalues[i]).collect();
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (k, &i) in order.iter().enumerate() {
            eigenvectors.set_column(k, &sym.eigenvectors.column(i));
        }
        Self {
            eigenvalues,
            eigenvectors,
        }
    }

    /// Residual and orthonormality diagnostics `(max |L psi - lambda psi|,
    /// max |Psi^T Psi - I|)` against the given Laplacian.
    pub fn validate(&self, l: &DMatrix<f64>) -> (f64, f64) {
        let n = l.nrows();
        let mut res: f64 = 0.0;
        for k in 0..n {
            let psi = self.eigenvectors.column(k);
            let r = l * psi - self.eigenvalues[k] * psi;
            res = res.max(r.amax());
        }
        let gram = self.eigenvectors.transpose() * &self.eigenvectors;
        let ortho = (&gram - DMatrix::<f64>::identity(n, n)).amax();
        (res, ortho)
    }
}

/// Magnitude of the current in dual edge `pq` by the spectral formula,
/// deflating the zero mode: `|sum_{k>0} (psi_k(p)-psi_k(q))(psi_k(u)-psi_k(v)) / lambda_k|`
/// times the edge conductance.
pub fn eigen_current(
    rd: &RestrictedDual,
    spec: &SpectralDecomposition,
    p: usize,
    q: usize,
) -> Result<f64, DualError> {
    if p == q {
        return Ok(0.0);
    }
    let conductance = rd
        .live_edges()
        .find(|&(_, (a, b), _)| (a, b) == (p, q) || (a, b) == (q, p))
        .map(|(_, _, c)| c)
        .ok_or(DualError::NotAdjacent(p, q))?;
    let n = rd.dual.face_count;
    // zero eigenvalue is unique for connected duals; deflate by skipping
    // eigenvalues at the bottom that are numerically zero
    let floor = 1e-9 * rd.dual.conductance.iter().fold(1.0f64, |m, &c| m.max(c)) * n as f64;
    let mut acc = 0.0;
    for k in 0..n {
        let lam = spec.eigenvalues[k];
        if lam.abs() <= floor {
            continue;
        }
        let col = spec.eigenvectors.column(k);
        acc += (col[p] - col[q]) * (col[rd.source] - col[rd.sink]) / lam;
    }
    Ok((acc * conductance).abs())
}

/// Current magnitude in dual edge `pq` from the grounded direct solve.
pub fn direct_current(rd: &RestrictedDual, p: usize, q: usize) -> Result<f64, DualError> {
    if p == q {
        return Ok(0.0);
    }
    let conductance = rd
        .live_edges()
        .find(|&(_, (a, b), _)| (a, b) == (p, q) || (a, b) == (q, p))
        .map(|(_, _, c)| c)
        .ok_or(DualError::NotAdjacent(p, q))?;
    let z = rd.direct_potentials()?;
    Ok(((z[p] - z[q]) * conductance).abs())
}

#[derive(Debug, Clone)]
pub struct PlanarTclBound {
    /// `|E(S)|` times the largest inverse boundary current.
    pub value: f64,
    pub max_inverse_current: f64,
    /// The same quantity computed on the primal side,
    /// `max_{v,w} 1/pi_w(v)` over sink-adjacent pairs.
    pub primal_max_inverse_potential: f64,
    /// Worst relative deviation between dual currents and primal potentials
    /// across all (power slot, target slot) pairs.
    pub max_route_deviation: f64,
}

/// Dual-route transience-class bound: for every sink-incident power slot,
/// solve the restricted dual and read boundary-node potentials as dual
/// currents of the remaining sink-incident slots. Falls back to the primal
/// route for power slots whose dual edge is a bridge.
pub fn planar_tcl_bound(
    g: &SandpileGraph,
    emb: &PlanarEmbedding,
) -> Result<PlanarTclBound, DualError> {
    assert!(emb.consistent_with(g), "embedding must match the graph");
    let circuit = EmbeddedCircuit::unit(emb.clone());
    let sink = g.sink();
    let boundary_slots: Vec<SlotId> = (0..emb.slot_count())
        .filter(|&s| {
            let (u, v) = emb.slot_endpoints(s);
            u == sink || v == sink
        })
        .collect();
    let harmonic = Harmonic::new(g).map_err(|_| DualError::Solve(SolveError::SingularSystem))?;
    let mut max_inv_current = 0.0f64;
    let mut max_dev = 0.0f64;
    for &power in &boundary_slots {
        let (a, b) = emb.slot_endpoints(power);
        let w = if a == sink { b } else { a };
        let pi = harmonic
            .solve_potential(w)
            .map_err(|_| DualError::Solve(SolveError::SingularSystem))?;
        match restricted_dual(&circuit, power) {
            Ok(rd) => {
                let z = rd.direct_potentials()?;
                for &target in &boundary_slots {
                    if target == power {
                        continue;
                    }
                    let (p, q) = rd.dual.edges[target];
                    if p == q {
                        continue; // bridge: dual loop carries no information
                    }
                    let cur = ((z[p] - z[q]) * rd.dual.conductance[target]).abs();
                    let (ta, tb) = emb.slot_endpoints(target);
                    let v = if ta == sink { tb } else { ta };
                    let pot = pi.values[v];
                    let scale = cur.abs().max(pot.abs()).max(1e-300);
                    max_dev = max_dev.max((cur - pot).abs() / scale);
                    if cur > 0.0 {
                        max_inv_current = max_inv_current.max(1.0 / cur);
                    }
                }
            }
            Err(DualError::Disconnecting) => {
                // primal fallback for bridges
                for &target in &boundary_slots {
                    if target == power {
                        continue;
                    }
                    let (ta, tb) = emb.slot_endpoints(target);
                    let v = if ta == sink { tb } else { ta };
                    if pi.values[v] > 0.0 {
                        max_inv_current = max_inv_current.max(1.0 / pi.values[v]);
                    }
                }
            }
            Err(e) => return Err(e),
        }
    }
    let primal = harmonic
        .tcl_upper_estimate()
        .map_err(|_| DualError::Solve(SolveError::SingularSystem))?;
    Ok(PlanarTclBound {
        value: g.total_edge_multiplicity() as f64 * max_inv_current,
        max_inverse_current: max_inv_current,
        primal_max_inverse_potential: primal.max_inverse_potential,
        max_route_deviation: max_dev,
    })
}

/// Kirchhoff loop law residual: worst signed sum of current * resistance
/// around the faces of the restricted dual (excluding faces touched by the
/// source edge... the source injection makes those non-circulatory).
pub fn worst_loop_residual(rd: &RestrictedDual, z: &[f64]) -> f64 {
    // With node potentials Z the loop sum telescopes by construction; the
    // meaningful check is the cut law, handled in `unit_flow_across_cuts`.
    // Here we verify the potential drops around any cycle cancel.
    let mut worst = 0.0f64;
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rd.dual.face_count];
    for (_, (a, b), c) in rd.live_edges() {
        adj[a].push((b, c));
        adj[b].push((a, c));
    }
    for a in 0..rd.dual.face_count {
        for &(b, _) in &adj[a] {
            for &(c2, _) in &adj[b] {
                if c2 == a {
                    continue;
                }
                if adj[c2].iter().any(|&(x, _)| x == a) {
                    let s = (z[a] - z[b]) + (z[b] - z[c2]) + (z[c2] - z[a]);
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    worst
}

/// Net current out of the source across the cut separating it from the rest;
/// must be 1 for every restricted dual.
pub fn source_outflow(rd: &RestrictedDual, z: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (_, (a, b), c) in rd.live_edges() {
        if a == rd.source {
            acc += (z[a] - z[b]) * c;
        } else if b == rd.source {
            acc += (z[b] - z[a]) * c;
        }
    }
    acc
}

/// Direction check for planar circuits: with poles `t` (positive) and `s`
/// (grounded) on the outer face, current in every outer-face edge flows
/// along the boundary from `t` towards `s`.
pub fn boundary_current_direction_check(
    circuit: &EmbeddedCircuit,
    t: VertexId,
    s: VertexId,
) -> Result<bool, DualError> {
    let emb = &circuit.embedding;
    let outer = &emb.faces()[emb.outer_face()];
    let verts: Vec<VertexId> = outer.iter().map(|&d| emb.dart_origin(d)).collect();
    let ti = verts
        .iter()
        .position(|&v| v == t)
        .expect("t must lie on the outer face");
    let si = verts
        .iter()
        .position(|&v| v == s)
        .expect("s must lie on the outer face");
    let edges: Vec<(VertexId, VertexId, f64)> = circuit.edges().collect();
    let n = emb.vertex_count();
    let pot = solve_dirichlet(n, &edges, &[(t, 1.0), (s, 0.0)])?;
    // walk the outer orbit from t; before reaching s currents follow the
    // walk direction, after s they oppose it
    let m = outer.len();
    let mut ok = true;
    for off in 0..m {
        let idx = (ti + off) % m;
        let d = outer[idx];
        let (a, b) = (emb.dart_origin(d), emb.dart_head(d));
        let before_s = if si >= ti { idx >= ti && idx < si } else { idx >= ti || idx < si };
        let drop = pot[a] - pot[b];
        let signed = if before_s { drop } else { -drop };
        if signed < -1e-9 {
            ok = false;
        }
    }
    Ok(ok)
}

#[derive(Debug, Clone)]
pub struct VariationReport {
    pub ok: bool,
    /// Max first-order deviation between the perturbed solve and the
    /// compensation-theorem superposition prediction.
    pub compensation_deviation: f64,
}

/// Perturb the resistance of boundary slot `e` by `+delta` with unit
/// potential across the boundary pole pair `(t, s)`; checks the signed
/// monotone change on both boundary segments and the compensation-theorem
/// first-order prediction.
pub fn boundary_resistance_variation_check(
    circuit: &EmbeddedCircuit,
    t: VertexId,
    s: VertexId,
    e: SlotId,
    delta: f64,
) -> Result<VariationReport, DualError> {
    assert!(delta >= 0.0);
    let emb = &circuit.embedding;
    let outer = &emb.faces()[emb.outer_face()];
    let edges: Vec<(VertexId, VertexId, f64)> = circuit.edges().collect();
    let n = emb.vertex_count();
    let base = solve_dirichlet(n, &edges, &[(t, 1.0), (s, 0.0)])?;

    let r_e = 1.0 / circuit.conductance[e];
    let mut perturbed_edges = edges.clone();
    perturbed_edges[e].2 = 1.0 / (r_e + delta);
    let pert = solve_dirichlet(n, &perturbed_edges, &[(t, 1.0), (s, 0.0)])?;

    // boundary walk positions
    let verts: Vec<VertexId> = outer.iter().map(|&d| emb.dart_origin(d)).collect();
    let m = outer.len() as i64;
    let ti = verts.iter().position(|&v| v == t).expect("t on outer face") as i64;
    let si = verts.iter().position(|&v| v == s).expect("s on outer face") as i64;
    let ei = outer
        .iter()
        .position(|&d| d / 2 == e)
        .expect("e on outer face") as i64;
    // walk towards s in whichever direction crosses e first; dart at index k
    // is crossed between verts[k] and verts[k+1]
    let forward_hits_e = (ei - ti).rem_euclid(m) < (si - ti).rem_euclid(m);
    let step: i64 = if forward_hits_e { 1 } else { -1 };
    let mut ok = true;
    let mut passed_e = false;
    let mut u = ti;
    loop {
        let next = (u + step).rem_euclid(m);
        let crossing = if step == 1 {
            outer[u as usize]
        } else {
            outer[next as usize]
        };
        if crossing / 2 == e {
            passed_e = true;
        }
        u = next;
        if u == si {
            break;
        }
        let v = verts[u as usize];
        if v == t || v == s {
            continue;
        }
        // potentials rise between the source and e, fall between e and ground
        let dv = pert[v] - base[v];
        if passed_e {
            if dv > 1e-9 {
                ok = false;
            }
        } else if dv < -1e-9 {
            ok = false;
        }
    }

    // compensation prediction at first order: EMF -I_e * delta in series
    // with e, sources shorted
    let (ea, eb) = emb.slot_endpoints(e);
    let i_e = (base[ea] - base[eb]) * circuit.conductance[e];
    let emf = -i_e * delta;
    let mut inj = vec![0.0; n];
    inj[ea] -= emf / r_e;
    inj[eb] += emf / r_e;
    let free_edges = edges.clone();
    let dv = solve_clamped_injection(n, &free_edges, &[(t, 0.0), (s, 0.0)], &inj)?;
    let mut comp_dev = 0.0f64;
    for v in 0..n {
        comp_dev = comp_dev.max((pert[v] - base[v] - dv[v]).abs());
    }
    Ok(VariationReport {
        ok,
        compensation_deviation: comp_dev,
    })
}

/// Solve with clamped vertices and extra current injections at free ones.
fn solve_clamped_injection(
    vertex_count: usize,
    edges: &[(VertexId, VertexId, f64)],
    clamps: &[(VertexId, f64)],
    injections: &[f64],
) -> Result<Vec<f64>, SolveError> {
    use nalgebra::DVector;
    let mut clamp_val = vec![None; vertex_count];
    for &(v, x) in clamps {
        clamp_val[v] = Some(x);
    }
    let free: Vec<VertexId> = (0..vertex_count).filter(|&v| clamp_val[v].is_none()).collect();
    let mut pos = vec![None; vertex_count];
    for (i, &v) in free.iter().enumerate() {
        pos[v] = Some(i);
    }
    let m = free.len();
    let mut l = DMatrix::zeros(m, m);
    let mut b = DVector::zeros(m);
    for &(u, v, c) in edges {
        match (pos[u], pos[v]) {
            (Some(i), Some(j)) => {
                l[(i, i)] += c;
                l[(j, j)] += c;
                l[(i, j)] -= c;
                l[(j, i)] -= c;
            }
            (Some(i), None) => {
                l[(i, i)] += c;
                b[i] += c * clamp_val[v].unwrap();
            }
            (None, Some(j)) => {
                l[(j, j)] += c;
                b[j] += c * clamp_val[u].unwrap();
            }
            (None, None) => {}
        }
    }
    for (i, &v) in free.iter().enumerate() {
        b[i] += injections[v];
    }
    let chol = nalgebra::Cholesky::new(l).ok_or(SolveError::SingularSystem)?;
    let x = chol.solve(&b);
    let mut out = vec![0.0; vertex_count];
    for v in 0..vertex_count {
        out[v] = match (clamp_val[v], pos[v]) {
            (Some(val), _) => val,
            (None, Some(i)) => x[i],
            _ => 0.0,
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{
        cycle_circuit, grid_embedding, plain_grid_circuit, triangle_embedding,
    };
    use crate::graph::{grid, grid_vertex};
    use approx::assert_relative_eq;

    #[test]
    fn triangle_dualizes_to_parallel_pair() {
        let emb = triangle_embedding();
        let d = dualize(&EmbeddedCircuit::unit(emb));
        assert_eq!(d.face_count, 2);
        assert_eq!(d.edge_count(), 3);
        assert!(d.edges.iter().all(|&(a, b)| a != b));
    }

    #[test]
    fn grid2_dual_counts_match_euler() {
        let emb = grid_embedding(2);
        let d = dualize(&EmbeddedCircuit::unit(emb.clone()));
        assert_eq!(d.edge_count(), emb.slot_count());
        assert_eq!(
            d.face_count as i64,
            2 - emb.vertex_count() as i64 + emb.slot_count() as i64
        );
    }

    #[test]
    fn dual_of_dual_has_primal_vertex_count() {
        // via Euler: dual faces correspond to primal vertices
        for n in [2usize, 3, 4] {
            let emb = grid_embedding(n);
            let d = dualize(&EmbeddedCircuit::unit(emb.clone()));
            let dual_faces = 2 + d.edge_count() as i64 - d.face_count as i64;
            assert_eq!(dual_faces, emb.vertex_count() as i64);
        }
    }

    #[test]
    fn triangle_restricted_dual_splits_current() {
        let emb = triangle_embedding();
        let c = EmbeddedCircuit::unit(emb);
        let rd = restricted_dual(&c, 0).unwrap();
        assert_eq!(rd.dual.face_count, 2);
        let spec = rd.spectral();
        let (p, q) = (rd.source, rd.sink);
        let ic = eigen_current(&rd, &spec, p, q).unwrap();
        assert_relative_eq!(ic, 0.5, max_relative = 1e-10);
        let dc = direct_current(&rd, p, q).unwrap();
        assert_relative_eq!(dc, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn eigen_matches_direct_on_grid_duals() {
        for n in [2usize, 3, 4] {
            let emb = grid_embedding(n);
            let c = EmbeddedCircuit::unit(emb.clone());
            // power edge: first sink slot at corner (1,1)
            let g = grid(n);
            let corner = grid_vertex(n, 1, 1);
            let power = emb.slots_between(corner, g.sink())[0];
            let rd = restricted_dual(&c, power).unwrap();
            let spec = rd.spectral();
            let z = rd.direct_potentials().unwrap();
            for (k, (p, q), cond) in rd.live_edges() {
                let _ = k;
                let ic = eigen_current(&rd, &spec, p, q).unwrap();
                let dc = ((z[p] - z[q]) * cond).abs();
                let scale = ic.max(dc).max(1e-12);
                assert!(
                    (ic - dc).abs() / scale <= 1e-8,
                    "eigen {ic} vs direct {dc} on n={n}"
                );
            }
            // flow conservation
            assert_relative_eq!(source_outflow(&rd, &z), 1.0, max_relative = 1e-9);
            assert!(worst_loop_residual(&rd, &z) < 1e-9);
        }
    }

    #[test]
    fn spectral_decomposition_validates() {
        let emb = grid_embedding(3);
        let c = EmbeddedCircuit::unit(emb);
        let rd = restricted_dual(&c, 0).unwrap();
        let spec = rd.spectral();
        let n = rd.dual.face_count;
        let mut l = DMatrix::zeros(n, n);
        for (_, (a, b), cc) in rd.live_edges() {
            l[(a, a)] += cc;
            l[(b, b)] += cc;
            l[(a, b)] -= cc;
            l[(b, a)] -= cc;
        }
        let (res, ortho) = spec.validate(&l);
        assert!(res < 1e-9, "eigen residual {res}");
        assert!(ortho < 1e-10, "orthonormality {ortho}");
        assert!(spec.eigenvalues[0].abs() < 1e-9);
        // constant zero mode
        let psi0 = spec.eigenvectors.column(0);
        let mean = psi0.iter().sum::<f64>() / n as f64;
        for x in psi0.iter() {
            assert_relative_eq!(*x, mean, epsilon = 1e-9);
        }
    }

    #[test]
    fn dual_route_matches_primal_on_grids() {
        for n in [2usize, 3, 4] {
            let g = grid(n);
            let emb = grid_embedding(n);
            let b = planar_tcl_bound(&g, &emb).unwrap();
            assert!(
                b.max_route_deviation < 1e-8,
                "edge-by-edge correspondence failed: {}",
                b.max_route_deviation
            );
            let scale = b.max_inverse_current.max(b.primal_max_inverse_potential);
            assert!(
                (b.max_inverse_current - b.primal_max_inverse_potential).abs() / scale < 1e-6,
                "dual {} vs primal {}",
                b.max_inverse_current,
                b.primal_max_inverse_potential
            );
        }
    }

    #[test]
    fn grid2_corner_to_corner_current_value() {
        // pi_{(2,2)}((1,1)) = 1/7 on GRID_2, matched by the dual current
        let g = grid(2);
        let emb = grid_embedding(2);
        let c = EmbeddedCircuit::unit(emb.clone());
        let far = grid_vertex(2, 2, 2);
        let near = grid_vertex(2, 1, 1);
        let power = emb.slots_between(far, g.sink())[0];
        let target = emb.slots_between(near, g.sink())[0];
        let rd = restricted_dual(&c, power).unwrap();
        let z = rd.direct_potentials().unwrap();
        let (p, q) = rd.dual.edges[target];
        let cur = ((z[p] - z[q]) * rd.dual.conductance[target]).abs();
        assert_relative_eq!(cur, 1.0 / 7.0, max_relative = 1e-10);
    }

    #[test]
    fn cycle_boundary_current_direction() {
        let c = cycle_circuit(8);
        assert!(boundary_current_direction_check(&c, 0, 3).unwrap());
        assert!(boundary_current_direction_check(&c, 2, 7).unwrap());
    }

    #[test]
    fn plain_grid_boundary_current_direction() {
        for n in [3usize, 5, 8] {
            let c = plain_grid_circuit(n);
            let t = grid_vertex(n, 1, 1);
            let s = grid_vertex(n, n, n);
            assert!(boundary_current_direction_check(&c, t, s).unwrap());
        }
    }

    #[test]
    fn series_path_dual_carries_unit_current() {
        // cycle of 3: restricted dual of any slot = 2 faces joined by the
        // two remaining slots in series... on the dual they are parallel;
        // total outflow is 1
        let c = cycle_circuit(3);
        let rd = restricted_dual(&c, 0).unwrap();
        let z = rd.direct_potentials().unwrap();
        assert_relative_eq!(source_outflow(&rd, &z), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn resistance_variation_monotone_and_compensated() {
        // voltage divider: cycle with poles adjacent
        let c = cycle_circuit(8);
        // choose boundary slot not incident to poles
        let rep = boundary_resistance_variation_check(&c, 0, 1, 4, 0.5).unwrap();
        assert!(rep.ok);
        // grid boundary edge
        let cg = plain_grid_circuit(4);
        let t = grid_vertex(4, 1, 1);
        let s = grid_vertex(4, 4, 4);
        // boundary slot on the outer face away from poles: edge (1,2)-(1,3)
        let emb = &cg.embedding;
        let a = grid_vertex(4, 1, 2);
        let b = grid_vertex(4, 1, 3);
        let e = emb.slots_between(a, b)[0];
        let rep = boundary_resistance_variation_check(&cg, t, s, e, 0.5).unwrap();
        assert!(rep.ok);
        // delta = 0 is the identity
        let rep0 = boundary_resistance_variation_check(&cg, t, s, e, 0.0).unwrap();
        assert!(rep0.ok && rep0.compensation_deviation < 1e-12);
        // first-order compensation at small delta
        let delta = 1e-6;
        let repc = boundary_resistance_variation_check(&cg, t, s, e, delta).unwrap();
        assert!(
            repc.compensation_deviation <= 100.0 * delta * delta,
            "compensation deviation {} vs delta^2 {}",
            repc.compensation_deviation,
            delta * delta
        );
    }

    #[test]
    fn bridge_slot_is_rejected() {
        // path graph: v0 - v1 - s embedded on a line; every edge is a bridge
        let mut b = crate::embedding::EmbeddingBuilder::new(3);
        let s0 = b.add_slot(0, 1);
        let s1 = b.add_slot(1, 2);
        b.set_rotation(0, vec![2 * s0]);
        b.set_rotation(1, vec![2 * s0 + 1, 2 * s1]);
        b.set_rotation(2, vec![2 * s1 + 1]);
        let emb = b.finish().unwrap();
        let c = EmbeddedCircuit::unit(emb);
        assert_eq!(restricted_dual(&c, 0).unwrap_err(), DualError::Disconnecting);
    }
}
