//! Grounded-Laplacian potential theory: potentials `pi_w`, effective
//! resistances, potential profiles, the LP-dual impedance bounds with
//! feasibility certificates, and the degree-bounded constant-factor
//! estimator.
//!
//! One Cholesky factorization per graph serves every source: with the sink
//! grounded, `pi_w(v) = G(v, w) / G(w, w)` where `G` is the grounded Green's
//! function, which is exactly the unit-potential clamp at `w`. The injected
//! current is read off as the residual of the grounded system at `w`.

use thiserror::Error;

use crate::engine::Configuration;
use crate::graph::{SandpileGraph, VertexId};
use crate::solver::{Grounded, SolveError};

/// Relative tolerance for equality assertions between solved quantities.
pub const REL_TOL: f64 = 1e-8;
/// Absolute slack for inequality assertions.
pub const ABS_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum HarmonicError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("vertex {0} is not ordinary")]
    NotOrdinary(VertexId),
}

/// Unit-potential response: `values[w] = 1`, sink implicitly 0.
#[derive(Debug, Clone)]
pub struct PotentialVector {
    pub source: VertexId,
    /// Per-vertex potentials, sink entry exactly 0, source entry exactly 1.
    pub values: Vec<f64>,
    /// Current injected at the source to hold it at unit potential.
    pub injected_current: f64,
}

/// Potential profile `Gamma_S(w) = sum_u (d(u) - 1) pi_w(u)`.
#[derive(Debug, Clone)]
pub struct ProfileReport {
    pub gamma: f64,
    /// Per-vertex weighted potentials `(d(u) - 1) pi_w(u)`.
    pub per_vertex: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Upper,
    Lower,
}

/// Feasible point for one of the two LP duals, scaled from `pi_w`.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub direction: Direction,
    /// `Y(u) = pi_w(u) / pi_w(v)` over ordinary vertices.
    pub y: Vec<f64>,
    /// Scaled injected current.
    pub y_prime: f64,
    /// Dual objective value; equals the corresponding bound formula along
    /// the same arithmetic path.
    pub objective: f64,
    /// Largest constraint violation observed during verification.
    pub max_violation: f64,
}

#[derive(Debug, Clone)]
pub struct TclEstimate {
    /// `max Gamma_S(w) / pi_w(v)` over ordered sink-adjacent pairs.
    pub value: f64,
    pub argmax: (VertexId, VertexId),
    /// Coarser relaxation `|E(S)| * max 1/pi_w(v)` over the same pairs.
    pub edge_relaxation: f64,
    pub max_inverse_potential: f64,
}

/// Per-graph harmonic solver; factors the grounded Laplacian once.
pub struct Harmonic<'g> {
    g: &'g SandpileGraph,
    grounded: Grounded,
}

impl<'g> Harmonic<'g> {
    pub fn new(g: &'g SandpileGraph) -> Result<Self, HarmonicError> {
        let grounded = Grounded::new(g.vertex_count(), g.sink(), g.conductance_edges())?;
        Ok(Self { g, grounded })
    }

    pub fn graph(&self) -> &SandpileGraph {
        self.g
    }

    fn require_ordinary(&self, v: VertexId) -> Result<(), HarmonicError> {
        if self.g.is_ordinary(v) {
            Ok(())
        } else {
            Err(HarmonicError::NotOrdinary(v))
        }
    }

    /// Potentials with unit potential clamped at `w` and the sink grounded.
    pub fn solve_potential(&self, w: VertexId) -> Result<PotentialVector, HarmonicError> {
        self.require_ordinary(w)?;
        let col = self.grounded.green_column(w);
        let gww = col[w];
        if !(gww.is_finite() && gww > 0.0) {
            return Err(SolveError::SingularSystem.into());
        }
        let mut values: Vec<f64> = col.iter().map(|&x| x / gww).collect();
        values[w] = 1.0;
        values[self.g.sink()] = 0.0;
        // injected current = residual of the grounded system at w
        let mut injected = self.g.weighted_degree(w) * values[w];
        for &(u, _) in self.g.neighbors(w) {
            if u != self.g.sink() {
                injected -= self.g.conductance(w, u) * values[u];
            }
        }
        Ok(PotentialVector {
            source: w,
            values,
            injected_current: injected,
        })
    }

    /// Effective resistance between any two distinct vertices (the sink is
    /// allowed as either argument).
    pub fn effective_resistance(&self, u: VertexId, v: VertexId) -> f64 {
        assert_ne!(u, v, "effective resistance needs distinct vertices");
        let s = self.g.sink();
        if u == s {
            return self.grounded.green_column(v)[v];
        }
        if v == s {
            return self.grounded.green_column(u)[u];
        }
        let cu = self.grounded.green_column(u);
        let cv = self.grounded.green_column(v);
        cu[u] - 2.0 * cu[v] + cv[v]
    }

    pub fn potential_profile(&self, w: VertexId) -> Result<ProfileReport, HarmonicError> {
        let p = self.solve_potential(w)?;
        Ok(self.profile_of(&p))
    }

    pub fn profile_of(&self, p: &PotentialVector) -> ProfileReport {
        let mut per_vertex = vec![0.0; self.g.vertex_count()];
        let mut gamma = 0.0;
        for u in self.g.ordinary_vertices() {
            per_vertex[u] = (self.g.degree(u) - 1) as f64 * p.values[u];
            gamma += per_vertex[u];
        }
        ProfileReport { gamma, per_vertex }
    }

    /// `Gamma_S(w) / pi_w(v)`, computed through the upper dual certificate's
    /// objective so the two share one arithmetic path.
    pub fn impedance_upper_bound(&self, v: VertexId, w: VertexId) -> Result<f64, HarmonicError> {
        Ok(self.dual_certificate(v, w, Direction::Upper)?.objective)
    }

    /// `1/pi_w(v) - 1`, via the lower dual certificate objective.
    pub fn impedance_lower_bound(&self, v: VertexId, w: VertexId) -> Result<f64, HarmonicError> {
        Ok(self.dual_certificate(v, w, Direction::Lower)?.objective - 1.0)
    }

    /// Construct and verify the scaled-potential feasible point of the
    /// requested LP dual. Fails with `InfeasibleCertificate` if any
    /// constraint is violated beyond `ABS_SLACK` (a solver bug, not an
    /// input condition).
    pub fn dual_certificate(
        &self,
        v: VertexId,
        w: VertexId,
        direction: Direction,
    ) -> Result<DualCertificate, HarmonicError> {
        self.require_ordinary(v)?;
        let p = self.solve_potential(w)?;
        self.certificate_from(&p, v, direction)
    }

    /// Certificate construction from an already-solved potential vector.
    pub fn certificate_from(
        &self,
        p: &PotentialVector,
        v: VertexId,
        direction: Direction,
    ) -> Result<DualCertificate, HarmonicError> {
        let w = p.source;
        let pv = p.values[v];
        if pv <= 0.0 {
            return Err(SolveError::InfiniteBound.into());
        }
        let n = self.g.vertex_count();
        let mut y = vec![0.0; n];
        for u in self.g.ordinary_vertices() {
            y[u] = p.values[u] / pv;
        }
        let y_prime = p.injected_current / pv;

        // residual(u) = sum_{u' ~ u} Y(u') - d(u) Y(u), plus Y' at u = w;
        // feasibility requires >= 0 for the upper dual, <= 0 for the lower.
        let mut max_violation: f64 = 0.0;
        for u in self.g.ordinary_vertices() {
            let mut r = -((self.g.degree(u)) as f64) * y[u];
            for &(uu, m) in self.g.neighbors(u) {
                if uu != self.g.sink() {
                    r += m as f64 * y[uu];
                }
            }
            if u == w {
                r += y_prime;
            }
            let viol = match direction {
                Direction::Upper => (-r).max(0.0),
                Direction::Lower => r.max(0.0),
            };
            max_violation = max_violation.max(viol);
            max_violation = max_violation.max(-y[u]); // Y >= 0
        }
        max_violation = max_violation.max(-y_prime); // Y' >= 0
        match direction {
            // Y(v) >= 1 (holds with equality by construction)
            Direction::Upper => max_violation = max_violation.max(1.0 - y[v]),
            // Y(v) <= 1
            Direction::Lower => max_violation = max_violation.max(y[v] - 1.0),
        }
        if max_violation > ABS_SLACK {
            return Err(SolveError::InfeasibleCertificate(max_violation).into());
        }
        let objective = match direction {
            Direction::Upper => {
                let mut acc = 0.0;
                for u in self.g.ordinary_vertices() {
                    acc += (self.g.degree(u) - 1) as f64 * y[u];
                }
                acc
            }
            Direction::Lower => y[w],
        };
        Ok(DualCertificate {
            direction,
            y,
            y_prime,
            objective,
            max_violation,
        })
    }

    /// `max Gamma_S(w) / pi_w(v)` over ordered sink-adjacent pairs, with the
    /// `|E|`-relaxation. Restricting `v` to the boundary is lossless for each
    /// fixed `w` (minimum principle); restricting `w` matches the transience
    /// application, where the last site to topple is sink-adjacent.
    pub fn tcl_upper_estimate(&self) -> Result<TclEstimate, HarmonicError> {
        let boundary = self.g.sink_adjacent();
        let mut best = f64::NEG_INFINITY;
        let mut argmax = (0, 0);
        let mut max_inv = 0.0f64;
        for &w in &boundary {
            let p = self.solve_potential(w)?;
            let gamma = self.profile_of(&p).gamma;
            for &v in &boundary {
                let pv = p.values[v];
                if pv <= 0.0 {
                    return Err(SolveError::InfiniteBound.into());
                }
                let est = gamma / pv;
                max_inv = max_inv.max(1.0 / pv);
                if est > best {
                    best = est;
                    argmax = (v, w);
                }
            }
        }
        Ok(TclEstimate {
            value: best,
            argmax,
            edge_relaxation: self.g.total_edge_multiplicity() as f64 * max_inv,
            max_inverse_potential: max_inv,
        })
    }

    /// Degree-bounded two-sided estimate `E = (1/pi_w(v)) sum_u pi_w(u)`,
    /// returning `(E, E/(Delta+1), E*(Delta-1))`.
    pub fn degree_bounded_estimate(
        &self,
        v: VertexId,
        w: VertexId,
    ) -> Result<(f64, f64, f64), HarmonicError> {
        self.require_ordinary(v)?;
        let p = self.solve_potential(w)?;
        let pv = p.values[v];
        if pv <= 0.0 {
            return Err(SolveError::InfiniteBound.into());
        }
        let delta = self
            .g
            .ordinary_vertices()
            .map(|u| self.g.degree(u))
            .max()
            .unwrap() as f64;
        let sum: f64 = self.g.ordinary_vertices().map(|u| p.values[u]).sum();
        let e = sum / pv;
        Ok((e, e / (delta + 1.0), e * (delta - 1.0)))
    }

    /// Height-weighted lower bound `(1/pi_w(v)) sum_u h(u) pi_w(u)`.
    pub fn height_weighted_lower_bound(
        &self,
        v: VertexId,
        w: VertexId,
        h: &Configuration,
    ) -> Result<f64, HarmonicError> {
        self.require_ordinary(v)?;
        let p = self.solve_potential(w)?;
        let pv = p.values[v];
        if pv <= 0.0 {
            return Err(SolveError::InfiniteBound.into());
        }
        let mut acc = 0.0;
        for u in self.g.ordinary_vertices() {
            acc += h.0[u] as f64 * p.values[u];
        }
        Ok(acc / pv)
    }

    /// Triangle inequality for potentials: `pi_i(j) pi_j(k) <= pi_i(k)`.
    pub fn check_triangle_inequality(
        &self,
        i: VertexId,
        j: VertexId,
        k: VertexId,
    ) -> Result<bool, HarmonicError> {
        let pi_i = self.solve_potential(i)?;
        let pi_j = self.solve_potential(j)?;
        Ok(pi_i.values[j] * pi_j.values[k] <= pi_i.values[k] + ABS_SLACK)
    }

    /// Potential reciprocity: `R_eff(s,t) pi_t(v) == R_eff(s,v) pi_v(t)`
    /// within relative tolerance.
    pub fn check_reciprocity(&self, t: VertexId, v: VertexId) -> Result<bool, HarmonicError> {
        if t == v {
            return Ok(true);
        }
        let s = self.g.sink();
        let lhs = self.effective_resistance(s, t) * self.solve_potential(t)?.values[v];
        let rhs = self.effective_resistance(s, v) * self.solve_potential(v)?.values[t];
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        Ok((lhs - rhs).abs() <= REL_TOL * scale)
    }

    /// Sandpile reciprocity bound: given `p = R_s(v, w)`, adding
    /// `2|E| (R_eff(v,s)/R_eff(w,s)) p` particles at `w` topples `v`.
    pub fn sandpile_reciprocity_bound(&self, v: VertexId, w: VertexId, p: u64) -> f64 {
        let s = self.g.sink();
        let ratio = self.effective_resistance(v, s) / self.effective_resistance(w, s);
        2.0 * self.g.total_edge_multiplicity() as f64 * ratio * p as f64
    }
}

/// Jacobi iteration for a boundary value problem on the sandpile network:
/// poles in `boundary` are clamped, every other vertex (sink included only
/// if listed) averages its neighbours. Starts from zero, stops when the
/// largest update falls below `tolerance`. The observer sees every iterate.
pub fn jacobi_solve(
    g: &SandpileGraph,
    boundary: &[(VertexId, f64)],
    tolerance: f64,
    max_iterations: usize,
    mut observer: impl FnMut(&[f64]),
) -> Result<(Vec<f64>, usize), HarmonicError> {
    assert!(!boundary.is_empty(), "boundary set must be non-empty");
    let n = g.vertex_count();
    let mut fixed = vec![None; n];
    for &(v, x) in boundary {
        fixed[v] = Some(x);
    }
    if fixed[g.sink()].is_none() {
        fixed[g.sink()] = Some(0.0);
    }
    let mut cur = vec![0.0; n];
    for v in 0..n {
        if let Some(x) = fixed[v] {
            cur[v] = x;
        }
    }
    observer(&cur);
    let mut next = cur.clone();
    for it in 1..=max_iterations {
        let mut delta = 0.0f64;
        for v in 0..n {
            if fixed[v].is_some() {
                continue;
            }
            let mut acc = 0.0;
            for &(u, m) in g.neighbors(v) {
                acc += m as f64 * cur[u];
            }
            let val = acc / g.degree(v) as f64;
            delta = delta.max((val - cur[v]).abs());
            next[v] = val;
        }
        std::mem::swap(&mut cur, &mut next);
        observer(&cur);
        if delta < tolerance {
            return Ok((cur, it));
        }
    }
    Err(SolveError::MaxIterations(max_iterations).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::sandpile_impedance_exact;
    use crate::graph::{build_graph, grid, grid_vertex, SandpileGraph};
    use approx::assert_relative_eq;

    fn path_vws() -> SandpileGraph {
        // v(0) - w(1) - s(2)
        SandpileGraph::build(3, 2, &[(0, 1, 1), (1, 2, 1)]).unwrap()
    }

    #[test]
    fn potential_path_hand_solves() {
        let g = path_vws();
        let h = Harmonic::new(&g).unwrap();
        // source w = 1: v's only non-sink route is w, so pi_w(v) = 1
        let p = h.solve_potential(1).unwrap();
        assert_relative_eq!(p.values[0], 1.0, max_relative = 1e-12);
        assert_eq!(p.values[1], 1.0);
        // source v = 0: w is the midpoint of a 2-edge path
        let p = h.solve_potential(0).unwrap();
        assert_relative_eq!(p.values[1], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn potential_bounds_and_harmonicity() {
        let g = grid(3);
        let h = Harmonic::new(&g).unwrap();
        for w in g.ordinary_vertices() {
            let p = h.solve_potential(w).unwrap();
            assert_eq!(p.values[w], 1.0);
            for v in g.ordinary_vertices() {
                assert!(p.values[v] >= -1e-12 && p.values[v] <= 1.0 + 1e-12);
            }
            // harmonicity away from poles
            for v in g.ordinary_vertices().filter(|&v| v != w) {
                let mut acc = 0.0;
                for &(u, m) in g.neighbors(v) {
                    if u != g.sink() {
                        acc += m as f64 * p.values[u];
                    }
                }
                assert_relative_eq!(
                    g.degree(v) as f64 * p.values[v],
                    acc,
                    epsilon = 1e-10,
                    max_relative = 1e-8
                );
            }
            // max principle: interior values between neighbour extremes
            for v in g.ordinary_vertices().filter(|&v| v != w) {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &(u, _) in g.neighbors(v) {
                    let x = if u == g.sink() { 0.0 } else { p.values[u] };
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                assert!(p.values[v] <= hi + 1e-12 && p.values[v] >= lo - 1e-12);
            }
        }
    }

    #[test]
    fn effective_resistance_series_and_parallel() {
        // path of 4 unit edges: endpoints see resistance 4
        let g = SandpileGraph::build(5, 4, &[(0, 1, 1), (1, 2, 1), (2, 3, 1), (3, 4, 1)]).unwrap();
        let h = Harmonic::new(&g).unwrap();
        assert_relative_eq!(h.effective_resistance(0, 4), 4.0, max_relative = 1e-10);
        // m parallel unit edges
        let g = build_graph(&[(0, 1, 5)], 1).unwrap();
        let h = Harmonic::new(&g).unwrap();
        assert_relative_eq!(h.effective_resistance(0, 1), 0.2, max_relative = 1e-12);
    }

    #[test]
    fn grid3_center_resistance_lower_bound() {
        let g = grid(3);
        let h = Harmonic::new(&g).unwrap();
        let c = grid_vertex(3, 2, 2);
        assert!(h.effective_resistance(g.sink(), c) >= 0.25);
    }

    #[test]
    fn profile_small_cases() {
        let g = build_graph(&[(0, 1, 1)], 1).unwrap();
        let h = Harmonic::new(&g).unwrap();
        assert_eq!(h.potential_profile(0).unwrap().gamma, 0.0);
        let g = build_graph(&[(0, 1, 2)], 1).unwrap();
        let h = Harmonic::new(&g).unwrap();
        assert_relative_eq!(h.potential_profile(0).unwrap().gamma, 1.0);
    }

    #[test]
    fn upper_bound_path_and_diagonal() {
        let g = path_vws();
        let h = Harmonic::new(&g).unwrap();
        // Gamma/pi = ((d(v)-1) pi(v) + (d(w)-1) pi(w)) / pi(v) = (0 + 1)/1 = 1
        let ub = h.impedance_upper_bound(0, 1).unwrap();
        let exact = sandpile_impedance_exact(&g, 0, 1).unwrap().finite().unwrap();
        assert!(exact as f64 <= ub + ABS_SLACK);
        // v = w: bound >= degree - 1 = exact
        let g = grid(2);
        let h = Harmonic::new(&g).unwrap();
        let ub = h.impedance_upper_bound(0, 0).unwrap();
        assert!(ub >= g.capacity(0) as f64 - ABS_SLACK);
    }

    #[test]
    fn lower_bound_cases() {
        let g = path_vws();
        let h = Harmonic::new(&g).unwrap();
        // v = w
        assert_relative_eq!(h.impedance_lower_bound(1, 1).unwrap(), 0.0, epsilon = 1e-12);
        // path w - v - s, adding at midpoint v=1, w=0: 1/(1/2) - 1 = 1
        let lb = h.impedance_lower_bound(1, 0).unwrap();
        assert_relative_eq!(lb, 1.0, max_relative = 1e-10);
        let exact = sandpile_impedance_exact(&g, 1, 0).unwrap().finite().unwrap();
        assert!(lb <= exact as f64 + ABS_SLACK);
    }

    #[test]
    fn certificates_feasible_and_shared_path() {
        let g = grid(3);
        let h = Harmonic::new(&g).unwrap();
        for (v, w) in [(0, 0), (0, 8), (3, 5)] {
            let up = h.dual_certificate(v, w, Direction::Upper).unwrap();
            assert!(up.max_violation <= ABS_SLACK);
            let lo = h.dual_certificate(v, w, Direction::Lower).unwrap();
            assert!(lo.max_violation <= ABS_SLACK);
            // bit-for-bit shared arithmetic path
            assert_eq!(up.objective, h.impedance_upper_bound(v, w).unwrap());
            assert_eq!(lo.objective - 1.0, h.impedance_lower_bound(v, w).unwrap());
        }
    }

    #[test]
    fn certificate_path_example() {
        // path v - w - s: Y = (1, 1), interior constraint holds with equality
        let g = path_vws();
        let h = Harmonic::new(&g).unwrap();
        let c = h.dual_certificate(0, 1, Direction::Upper).unwrap();
        assert_relative_eq!(c.y[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(c.y[1], 1.0, max_relative = 1e-12);
        assert!(c.max_violation <= 1e-12);
    }

    #[test]
    fn degree_bounded_single_vertex() {
        // single ordinary vertex, double edge to sink: E = 1, exact = 1
        let g = build_graph(&[(0, 1, 2)], 1).unwrap();
        let h = Harmonic::new(&g).unwrap();
        let (e, lo, up) = h.degree_bounded_estimate(0, 0).unwrap();
        assert_relative_eq!(e, 1.0, max_relative = 1e-12);
        let exact = sandpile_impedance_exact(&g, 0, 0).unwrap().finite().unwrap() as f64;
        assert!(lo - ABS_SLACK <= exact && exact <= up + ABS_SLACK);
        assert_relative_eq!(lo, 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(up, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn height_weighted_bound_cases() {
        let g = grid(3);
        let h = Harmonic::new(&g).unwrap();
        let zero = Configuration::empty(&g);
        assert_eq!(h.height_weighted_lower_bound(0, 8, &zero).unwrap(), 0.0);
        // indicator relaxation is dominated by the h-weighted value
        let (v, w) = (0, 8);
        let x = sandpile_impedance_exact(&g, v, w).unwrap().finite().unwrap();
        let stacked = crate::engine::stabilize(
            &g,
            &Configuration::single_stack(&g, v, x + 1),
            crate::engine::OrderPolicy::Fifo,
        )
        .unwrap()
        .stable;
        let hw = h.height_weighted_lower_bound(v, w, &stacked).unwrap();
        let mut indicator = stacked.clone();
        for u in g.ordinary_vertices() {
            indicator.0[u] = indicator.0[u].min(1);
        }
        let ind = h.height_weighted_lower_bound(v, w, &indicator).unwrap();
        assert!(ind <= hw + ABS_SLACK);
        // bound is at most the exact minimum count x_v' = x_v + 1
        assert!(hw <= (x + 1) as f64 + ABS_SLACK);
    }

    #[test]
    fn triangle_inequality_cases() {
        let g = grid(3);
        let h = Harmonic::new(&g).unwrap();
        assert!(h.check_triangle_inequality(0, 0, 5).unwrap());
        // on a path every walk threads the midpoint, so equality holds
        let gp = SandpileGraph::build(4, 3, &[(0, 1, 1), (1, 2, 1), (2, 3, 1)]).unwrap();
        let hp = Harmonic::new(&gp).unwrap();
        let pi_0 = hp.solve_potential(0).unwrap();
        let pi_1 = hp.solve_potential(1).unwrap();
        assert_relative_eq!(
            pi_0.values[1] * pi_1.values[2],
            pi_0.values[2],
            max_relative = 1e-10
        );
        assert!(hp.check_triangle_inequality(0, 1, 2).unwrap());
        // with alternative routes around the midpoint the inequality is strict
        let pi_c = h.solve_potential(0).unwrap();
        let pi_m = h.solve_potential(4).unwrap();
        assert!(pi_c.values[4] * pi_m.values[8] < pi_c.values[8] - 1e-6);
        assert!(h.check_triangle_inequality(0, 4, 8).unwrap());
    }

    #[test]
    fn reciprocity_cases() {
        let g = grid(3);
        let h = Harmonic::new(&g).unwrap();
        assert!(h.check_reciprocity(4, 4).unwrap());
        // symmetric positions: equal effective resistances force equal
        // cross potentials
        let (a, b) = (grid_vertex(3, 1, 2), grid_vertex(3, 2, 1));
        let pa = h.solve_potential(a).unwrap();
        let pb = h.solve_potential(b).unwrap();
        assert_relative_eq!(pa.values[b], pb.values[a], max_relative = 1e-10);
        assert!(h.check_reciprocity(a, b).unwrap());
    }

    #[test]
    fn superposition_of_current_sources() {
        let g = grid(3);
        let h = Harmonic::new(&g).unwrap();
        let gr = Grounded::new(g.vertex_count(), g.sink(), g.conductance_edges()).unwrap();
        let mut b1 = vec![0.0; g.vertex_count()];
        b1[0] = 1.0;
        let mut b2 = vec![0.0; g.vertex_count()];
        b2[5] = 2.5;
        let x1 = gr.solve_injection(&b1);
        let x2 = gr.solve_injection(&b2);
        let mut b12 = b1.clone();
        b12[5] = 2.5;
        let x12 = gr.solve_injection(&b12);
        for v in 0..g.vertex_count() {
            assert_relative_eq!(x12[v], x1[v] + x2[v], epsilon = 1e-10);
        }
        let _ = h;
    }

    #[test]
    fn jacobi_constant_boundary_and_agreement() {
        let g = grid(4);
        let h = Harmonic::new(&g).unwrap();
        // all-boundary constant kappa converges to the constant
        let kappa = 0.75;
        let clamps: Vec<(VertexId, f64)> = g.sink_adjacent().iter().map(|&v| (v, kappa)).collect();
        let (vals, _) = jacobi_solve(&g, &clamps, 1e-12, 100_000, |_| {}).unwrap();
        for v in g.ordinary_vertices() {
            assert_relative_eq!(vals[v], kappa, epsilon = 1e-9);
        }
        // agreement with the direct clamped solve for a unit source
        let w = 0;
        let (vals, iters) = jacobi_solve(&g, &[(w, 1.0)], 1e-13, 200_000, |_| {}).unwrap();
        assert!(iters > 1);
        let direct = h.solve_potential(w).unwrap();
        for v in g.ordinary_vertices() {
            assert_relative_eq!(vals[v], direct.values[v], epsilon = 1e-9);
        }
    }

    #[test]
    fn jacobi_iterates_nondecreasing_for_nonnegative_data() {
        let g = grid(4);
        let mut prev: Option<Vec<f64>> = None;
        let mut ok = true;
        let _ = jacobi_solve(&g, &[(0, 1.0)], 1e-10, 100_000, |cur| {
            if let Some(p) = &prev {
                if cur.iter().zip(p).any(|(a, b)| a < &(b - 1e-15)) {
                    ok = false;
                }
            }
            prev = Some(cur.to_vec());
        })
        .unwrap();
        assert!(ok, "Jacobi iterates must be pointwise non-decreasing");
    }

    #[test]
    fn jacobi_max_iterations_error() {
        let g = grid(4);
        let err = jacobi_solve(&g, &[(0, 1.0)], 1e-13, 3, |_| {});
        assert_eq!(
            err.unwrap_err(),
            HarmonicError::Solve(SolveError::MaxIterations(3))
        );
    }
}
