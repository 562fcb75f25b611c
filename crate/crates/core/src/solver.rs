//! Dense symmetric solves for grounded and clamped Laplacian systems.
//!
//! Everything runs through a one-time Cholesky factorization. At desk scale
//! (up to a few thousand vertices) a direct factorization is bit-stable and
//! fast enough; no approximate solver is used anywhere.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::graph::{reduced_index, VertexId};

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("singular system: grounded Laplacian is not positive definite")]
    SingularSystem,
    #[error("potential at the probe vertex is zero; bound is infinite")]
    InfiniteBound,
    #[error("dual certificate violates its LP constraints by {0:e}")]
    InfeasibleCertificate(f64),
    #[error("iteration limit {0} reached before convergence")]
    MaxIterations(usize),
    #[error("vertex {0} is not valid here")]
    BadVertex(VertexId),
}

/// Factorized sink-grounded weighted Laplacian of a network.
pub struct Grounded {
    vertex_count: usize,
    grounded_vertex: VertexId,
    pos: Vec<Option<usize>>,
    chol: Cholesky<f64, Dyn>,
}

impl Grounded {
    /// Factor the Laplacian of the weighted graph given by `edges`
    /// (conductances) with `grounded_vertex` removed.
    pub fn new(
        vertex_count: usize,
        grounded_vertex: VertexId,
        edges: impl Iterator<Item = (VertexId, VertexId, f64)>,
    ) -> Result<Self, SolveError> {
        let pos = reduced_index(vertex_count, grounded_vertex);
        let m = vertex_count - 1;
        let mut l = DMatrix::zeros(m, m);
        for (u, v, c) in edges {
            if let Some(i) = pos[u] {
                l[(i, i)] += c;
            }
            if let Some(j) = pos[v] {
                l[(j, j)] += c;
            }
            if let (Some(i), Some(j)) = (pos[u], pos[v]) {
                l[(i, j)] -= c;
                l[(j, i)] -= c;
            }
        }
        let chol = Cholesky::new(l).ok_or(SolveError::SingularSystem)?;
        Ok(Self {
            vertex_count,
            grounded_vertex,
            pos,
            chol,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn grounded_vertex(&self) -> VertexId {
        self.grounded_vertex
    }

    /// Solve `L x = b` with `b` given per vertex (grounded entry ignored);
    /// returns potentials per vertex with the grounded entry exactly 0.
    pub fn solve_injection(&self, b: &[f64]) -> Vec<f64> {
        let m = self.vertex_count - 1;
        let mut rhs = DVector::zeros(m);
        for v in 0..self.vertex_count {
            if let Some(i) = self.pos[v] {
                rhs[i] = b[v];
            }
        }
        let x = self.chol.solve(&rhs);
        self.expand(&x)
    }

    /// Column of the grounded Green's function: response to a unit current
    /// injected at `v`.
    pub fn green_column(&self, v: VertexId) -> Vec<f64> {
        let m = self.vertex_count - 1;
        let mut rhs = DVector::zeros(m);
        rhs[self.pos[v].expect("grounded vertex has no Green column")] = 1.0;
        let x = self.chol.solve(&rhs);
        self.expand(&x)
    }

    fn expand(&self, x: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.vertex_count];
        for v in 0..self.vertex_count {
            if let Some(i) = self.pos[v] {
                out[v] = x[i];
            }
        }
        out
    }
}

/// Solve a boundary value problem: potentials clamped at `clamps`, all other
/// vertices harmonic in the weighted graph. Returns per-vertex potentials.
pub fn solve_dirichlet(
    vertex_count: usize,
    edges: &[(VertexId, VertexId, f64)],
    clamps: &[(VertexId, f64)],
) -> Result<Vec<f64>, SolveError> {
    let mut clamp_val = vec![None; vertex_count];
    for &(v, x) in clamps {
        if v >= vertex_count {
            return Err(SolveError::BadVertex(v));
        }
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
        if u == v {
            continue;
        }
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
    if m == 0 {
        return Ok((0..vertex_count).map(|v| clamp_val[v].unwrap_or(0.0)).collect());
    }
    let chol = Cholesky::new(l).ok_or(SolveError::SingularSystem)?;
    let x = chol.solve(&b);
    let mut out = vec![0.0; vertex_count];
    for v in 0..vertex_count {
        out[v] = match (clamp_val[v], pos[v]) {
            (Some(val), _) => val,
            (None, Some(i)) => x[i],
            _ => unreachable!(),
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn path_injection() {
        // path 0 - 1 - 2(ground), unit conductances
        let g = Grounded::new(3, 2, [(0usize, 1usize, 1.0), (1, 2, 1.0)].into_iter()).unwrap();
        // unit current at 0: potentials 2, 1, 0 (series resistors)
        let x = g.green_column(0);
        assert_relative_eq!(x[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(x[1], 1.0, max_relative = 1e-12);
        assert_eq!(x[2], 0.0);
    }

    #[test]
    fn dirichlet_midpoint() {
        let edges = [(0usize, 1usize, 1.0), (1, 2, 1.0)];
        let v = solve_dirichlet(3, &edges, &[(0, 1.0), (2, 0.0)]).unwrap();
        assert_relative_eq!(v[1], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn dirichlet_matches_green_ratio() {
        let g = crate::graph::grid(3);
        let edges: Vec<_> = g.conductance_edges().collect();
        let grounded = Grounded::new(g.vertex_count(), g.sink(), edges.iter().copied()).unwrap();
        for w in [0usize, 4, 7] {
            let col = grounded.green_column(w);
            let clamped = solve_dirichlet(g.vertex_count(), &edges, &[(w, 1.0), (g.sink(), 0.0)])
                .unwrap();
            for v in g.ordinary_vertices() {
                assert_relative_eq!(col[v] / col[w], clamped[v], max_relative = 1e-10);
            }
        }
    }
}
