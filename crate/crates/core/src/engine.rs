//! Exact integer sandpile dynamics.
//!
//! Stabilization runs a FIFO queue of unstable sites and topples each site
//! fully (`floor(c/d)` multi-topplings at once); the abelian property makes
//! the policy choice irrelevant to the result, which the tests verify rather
//! than assume. Every stabilization is checked against the integer linear
//! relation `sigma(c) = c - L'z` and exact particle conservation.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{SandpileGraph, VertexId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("configuration is not stable")]
    NotStable,
    #[error("sandpile operations require integer conductances equal to multiplicities")]
    NonIntegerNetwork,
    #[error("height overflow during stabilization")]
    HeightOverflow,
    #[error("ordinary vertices are disconnected; the quantity is infinite")]
    Infinite,
    #[error("configuration length {got} does not match vertex count {want}")]
    BadLength { got: usize, want: usize },
    #[error("vertex {0} is not ordinary")]
    NotOrdinary(VertexId),
}

/// Particle heights per vertex id; the sink entry must stay zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration(pub Vec<u64>);

impl Configuration {
    pub fn empty(g: &SandpileGraph) -> Self {
        Configuration(vec![0; g.vertex_count()])
    }

    pub fn single_stack(g: &SandpileGraph, v: VertexId, k: u64) -> Self {
        let mut c = Self::empty(g);
        c.0[v] = k;
        c
    }

    /// Every ordinary vertex at its capacity `degree - 1`.
    pub fn max_stable(g: &SandpileGraph) -> Self {
        let mut c = Self::empty(g);
        for v in g.ordinary_vertices() {
            c.0[v] = g.capacity(v);
        }
        c
    }

    pub fn weight(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn heights(&self) -> &[u64] {
        &self.0
    }

    fn validate(&self, g: &SandpileGraph) -> Result<(), EngineError> {
        if self.0.len() != g.vertex_count() {
            return Err(EngineError::BadLength {
                got: self.0.len(),
                want: g.vertex_count(),
            });
        }
        Ok(())
    }
}

/// Toppling counts of a stabilization run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreVector(pub Vec<u64>);

#[derive(Debug, Clone)]
pub struct StabilizeResult {
    pub stable: Configuration,
    pub score: ScoreVector,
    pub topple_events: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderPolicy {
    /// FIFO queue of unstable sites (default).
    Fifo,
    /// Uniformly random choice among currently unstable sites.
    Random(u64),
}

pub fn is_stable(g: &SandpileGraph, c: &Configuration) -> bool {
    g.ordinary_vertices().all(|v| c.0[v] < g.degree(v))
}

/// Stabilize `c`; panics never, terminates because the sink is reachable.
pub fn stabilize(
    g: &SandpileGraph,
    c: &Configuration,
    policy: OrderPolicy,
) -> Result<StabilizeResult, EngineError> {
    if !g.is_unit_network() {
        return Err(EngineError::NonIntegerNetwork);
    }
    c.validate(g)?;
    let mut heights = c.0.clone();
    let mut score = vec![0u64; g.vertex_count()];
    let mut topple_events = 0u64;
    match policy {
        OrderPolicy::Fifo => {
            let mut queue: VecDeque<VertexId> = VecDeque::new();
            let mut queued = vec![false; g.vertex_count()];
            for v in g.ordinary_vertices() {
                if heights[v] >= g.degree(v) {
                    queue.push_back(v);
                    queued[v] = true;
                }
            }
            while let Some(v) = queue.pop_front() {
                queued[v] = false;
                let d = g.degree(v);
                if heights[v] < d {
                    continue;
                }
                let times = heights[v] / d;
                heights[v] -= times * d;
                score[v] = score[v].checked_add(times).ok_or(EngineError::HeightOverflow)?;
                topple_events = topple_events
                    .checked_add(times)
                    .ok_or(EngineError::HeightOverflow)?;
                for &(u, m) in g.neighbors(v) {
                    if u == g.sink() {
                        continue;
                    }
                    heights[u] = heights[u]
                        .checked_add(times.checked_mul(m).ok_or(EngineError::HeightOverflow)?)
                        .ok_or(EngineError::HeightOverflow)?;
                    if heights[u] >= g.degree(u) && !queued[u] {
                        queue.push_back(u);
                        queued[u] = true;
                    }
                }
            }
        }
        OrderPolicy::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut unstable: Vec<VertexId> = g
                .ordinary_vertices()
                .filter(|&v| heights[v] >= g.degree(v))
                .collect();
            while !unstable.is_empty() {
                let k = rng.gen_range(0..unstable.len());
                let v = unstable.swap_remove(k);
                let d = g.degree(v);
                if heights[v] < d {
                    continue;
                }
                // single toppling per draw
                heights[v] -= d;
                score[v] += 1;
                topple_events += 1;
                for &(u, m) in g.neighbors(v) {
                    if u == g.sink() {
                        continue;
                    }
                    heights[u] = heights[u].checked_add(m).ok_or(EngineError::HeightOverflow)?;
                    if heights[u] >= g.degree(u) && !unstable.contains(&u) {
                        unstable.push(u);
                    }
                }
                if heights[v] >= d {
                    unstable.push(v);
                }
            }
        }
    }
    let result = StabilizeResult {
        stable: Configuration(heights),
        score: ScoreVector(score),
        topple_events,
    };
    verify_stabilization(g, c, &result);
    Ok(result)
}

/// Exact integer checks run on every stabilization: the grounded-Laplacian
/// relation and particle conservation with sink absorption.
fn verify_stabilization(g: &SandpileGraph, before: &Configuration, r: &StabilizeResult) {
    let z = &r.score.0;
    let mut absorbed: u64 = 0;
    for v in g.ordinary_vertices() {
        let mut after = before.0[v] as i128 - g.degree(v) as i128 * z[v] as i128;
        for &(u, m) in g.neighbors(v) {
            if u != g.sink() {
                after += m as i128 * z[u] as i128;
            }
        }
        assert_eq!(
            after, r.stable.0[v] as i128,
            "stabilization violated sigma(c) = c - L'z at vertex {v}"
        );
        absorbed += z[v] * g.sink_multiplicity(v);
    }
    assert_eq!(
        before.weight(),
        r.stable.weight() + absorbed,
        "particle conservation violated"
    );
}

/// Incremental sandpile that supports adding particles one at a time.
pub struct Pile<'g> {
    g: &'g SandpileGraph,
    heights: Vec<u64>,
    queue: VecDeque<VertexId>,
    queued: Vec<bool>,
}

impl<'g> Pile<'g> {
    pub fn new(g: &'g SandpileGraph) -> Result<Self, EngineError> {
        if !g.is_unit_network() {
            return Err(EngineError::NonIntegerNetwork);
        }
        Ok(Self {
            g,
            heights: vec![0; g.vertex_count()],
            queue: VecDeque::new(),
            queued: vec![false; g.vertex_count()],
        })
    }

    pub fn heights(&self) -> &[u64] {
        &self.heights
    }

    pub fn config(&self) -> Configuration {
        Configuration(self.heights.clone())
    }

    pub fn set_config(&mut self, c: &Configuration) {
        self.heights.copy_from_slice(&c.0);
    }

    /// Add `count` particles at `v` and stabilize; returns per-vertex
    /// toppling counts of this relaxation.
    pub fn add_and_stabilize(&mut self, v: VertexId, count: u64) -> Result<ScoreVector, EngineError> {
        self.heights[v] = self.heights[v]
            .checked_add(count)
            .ok_or(EngineError::HeightOverflow)?;
        let mut score = vec![0u64; self.g.vertex_count()];
        if self.heights[v] >= self.g.degree(v) && self.g.is_ordinary(v) {
            self.queue.push_back(v);
            self.queued[v] = true;
        }
        while let Some(x) = self.queue.pop_front() {
            self.queued[x] = false;
            let d = self.g.degree(x);
            if self.heights[x] < d {
                continue;
            }
            let times = self.heights[x] / d;
            self.heights[x] -= times * d;
            score[x] = score[x].checked_add(times).ok_or(EngineError::HeightOverflow)?;
            for &(u, m) in self.g.neighbors(x) {
                if u == self.g.sink() {
                    continue;
                }
                self.heights[u] = self.heights[u]
                    .checked_add(times.checked_mul(m).ok_or(EngineError::HeightOverflow)?)
                    .ok_or(EngineError::HeightOverflow)?;
                if self.heights[u] >= self.g.degree(u) && !self.queued[u] {
                    self.queue.push_back(u);
                    self.queued[u] = true;
                }
            }
        }
        Ok(ScoreVector(score))
    }
}

/// Exact sandpile impedance, finite or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Impedance {
    Finite(u64),
    Infinite,
}

impl Impedance {
    pub fn finite(self) -> Option<u64> {
        match self {
            Impedance::Finite(x) => Some(x),
            Impedance::Infinite => None,
        }
    }
}

/// Result of an incremental single-site addition run from the empty
/// configuration until every ordinary site toppled at least once.
#[derive(Debug, Clone)]
pub struct ImpedanceProfile {
    pub source: VertexId,
    /// Per vertex: particles added strictly before its first toppling.
    pub before_first_topple: Vec<u64>,
    /// Sites in order of first toppling.
    pub first_topple_order: Vec<VertexId>,
    pub total_added: u64,
    pub final_config: Configuration,
}

/// Add particles at `v` one at a time from empty until every ordinary site
/// has toppled; records for each site the count added strictly before its
/// first toppling. `None` when the ordinary subgraph is disconnected.
pub fn impedance_profile(
    g: &SandpileGraph,
    v: VertexId,
) -> Result<Option<ImpedanceProfile>, EngineError> {
    if !g.is_ordinary(v) {
        return Err(EngineError::NotOrdinary(v));
    }
    if !g.ordinary_connected() {
        return Ok(None);
    }
    let mut pile = Pile::new(g)?;
    let mut toppled = vec![false; g.vertex_count()];
    let mut before = vec![0u64; g.vertex_count()];
    let mut order = Vec::with_capacity(g.ordinary_count());
    let mut added = 0u64;
    while order.len() < g.ordinary_count() {
        let score = pile.add_and_stabilize(v, 1)?;
        added += 1;
        for u in g.ordinary_vertices() {
            if score.0[u] > 0 && !toppled[u] {
                toppled[u] = true;
                before[u] = added - 1;
                order.push(u);
            }
        }
    }
    Ok(Some(ImpedanceProfile {
        source: v,
        before_first_topple: before,
        first_topple_order: order,
        total_added: added,
        final_config: pile.config(),
    }))
}

/// `R_s(v, w)`: maximum particles addable at `v` (from empty, one at a time)
/// before a toppling at `w` occurs. `R_s(v, v) = degree(v) - 1`.
pub fn sandpile_impedance_exact(
    g: &SandpileGraph,
    v: VertexId,
    w: VertexId,
) -> Result<Impedance, EngineError> {
    if !g.is_ordinary(v) {
        return Err(EngineError::NotOrdinary(v));
    }
    if !g.is_ordinary(w) {
        return Err(EngineError::NotOrdinary(w));
    }
    if !g.ordinary_connected() {
        return Ok(Impedance::Infinite);
    }
    let mut pile = Pile::new(g)?;
    let mut added = 0u64;
    loop {
        let score = pile.add_and_stabilize(v, 1)?;
        added += 1;
        if score.0[w] > 0 {
            return Ok(Impedance::Finite(added - 1));
        }
    }
}

/// The site whose first toppling occurs last when particles are added at `v`.
/// Always sink-adjacent (asserted).
pub fn last_toppler(g: &SandpileGraph, v: VertexId) -> Result<VertexId, EngineError> {
    let profile = impedance_profile(g, v)?.ok_or(EngineError::Infinite)?;
    let last = *profile.first_topple_order.last().expect("nonempty");
    assert!(
        g.sink_multiplicity(last) > 0,
        "last toppler must be sink-adjacent"
    );
    Ok(last)
}

/// Dhar's burning test: burn `v` once `c(v)` reaches its edge count to
/// unburnt ordinary vertices; recurrent iff everything burns.
pub fn is_recurrent_burning(g: &SandpileGraph, c: &Configuration) -> Result<bool, EngineError> {
    c.validate(g)?;
    if !is_stable(g, c) {
        return Err(EngineError::NotStable);
    }
    let mut burnt = vec![false; g.vertex_count()];
    burnt[g.sink()] = true;
    let mut remaining = g.ordinary_count();
    let mut frontier = true;
    while frontier {
        frontier = false;
        for v in g.ordinary_vertices() {
            if burnt[v] {
                continue;
            }
            let unburnt_edges: u64 = g
                .neighbors(v)
                .iter()
                .filter(|&&(u, _)| !burnt[u])
                .map(|&(_, m)| m)
                .sum();
            if c.0[v] >= unburnt_edges {
                burnt[v] = true;
                remaining -= 1;
                frontier = true;
            }
        }
    }
    Ok(remaining == 0)
}

/// Independent recurrence oracle: fire the sink once (one particle per sink
/// edge) and stabilize; recurrent iff the configuration returns to itself.
pub fn is_recurrent_sink_firing(g: &SandpileGraph, c: &Configuration) -> Result<bool, EngineError> {
    c.validate(g)?;
    if !is_stable(g, c) {
        return Err(EngineError::NotStable);
    }
    let mut fired = c.clone();
    for v in g.ordinary_vertices() {
        fired.0[v] = fired.0[v]
            .checked_add(g.sink_multiplicity(v))
            .ok_or(EngineError::HeightOverflow)?;
    }
    let r = stabilize(g, &fired, OrderPolicy::Fifo)?;
    Ok(r.stable == *c)
}

/// Stack `R_s(v, w)` particles at `v`, stabilize, then raise every other
/// site toward capacity one particle at a time; a watchdog rolls back any
/// addition whose relaxation topples `w`.
pub fn heaviest_transient_topup(
    g: &SandpileGraph,
    v: VertexId,
    w: VertexId,
) -> Result<Configuration, EngineError> {
    let r = match sandpile_impedance_exact(g, v, w)? {
        Impedance::Finite(r) => r,
        Impedance::Infinite => return Err(EngineError::Infinite),
    };
    let base = stabilize(g, &Configuration::single_stack(g, v, r), OrderPolicy::Fifo)?;
    let mut current = base.stable;
    for u in g.ordinary_vertices() {
        if u == w {
            continue;
        }
        while current.0[u] < g.capacity(u) {
            let mut trial = current.clone();
            trial.0[u] += 1;
            let relaxed = stabilize(g, &trial, OrderPolicy::Fifo)?;
            if relaxed.score.0[w] > 0 {
                break; // rollback: keep `current`
            }
            current = relaxed.stable;
        }
    }
    Ok(current)
}

/// Testable consequence of stabilization linearity under scaling:
/// `sigma(k c) == sigma(k sigma(c))`.
pub fn scaling_commutation_check(
    g: &SandpileGraph,
    c: &Configuration,
    k: u64,
) -> Result<bool, EngineError> {
    let scale = |conf: &Configuration| -> Result<Configuration, EngineError> {
        let mut out = conf.clone();
        for h in &mut out.0 {
            *h = h.checked_mul(k).ok_or(EngineError::HeightOverflow)?;
        }
        Ok(out)
    };
    let lhs = stabilize(g, &scale(c)?, OrderPolicy::Fifo)?;
    let sigma_c = stabilize(g, c, OrderPolicy::Fifo)?;
    let rhs = stabilize(g, &scale(&sigma_c.stable)?, OrderPolicy::Fifo)?;
    Ok(lhs.stable == rhs.stable)
}

/// Single-site transient horizon: adds particles at `v` one at a time and
/// returns the largest stack size whose stabilization is still transient,
/// together with that stable configuration.
pub fn transient_stack_profile(
    g: &SandpileGraph,
    v: VertexId,
) -> Result<(u64, Configuration), EngineError> {
    if !g.is_ordinary(v) {
        return Err(EngineError::NotOrdinary(v));
    }
    let mut pile = Pile::new(g)?;
    let mut k = 0u64;
    let mut last_transient = Configuration::empty(g);
    loop {
        let c = pile.config();
        if is_recurrent_burning(g, &c)? {
            // recurrence is closed under addition, so the previous stack was
            // the last transient one
            return Ok((k - 1, last_transient));
        }
        last_transient = c;
        pile.add_and_stabilize(v, 1)?;
        k += 1;
    }
}

/// Brute-force recurrence oracle for tiny graphs: BFS over stable
/// configurations reachable from the maximal stable configuration by
/// single-particle additions. Recurrent iff reachable from it.
pub fn recurrent_set_bruteforce(g: &SandpileGraph) -> Result<Vec<Configuration>, EngineError> {
    use std::collections::{BTreeSet, VecDeque as Dq};
    let start = Configuration::max_stable(g);
    let mut seen: BTreeSet<Vec<u64>> = BTreeSet::new();
    seen.insert(start.0.clone());
    let mut queue: Dq<Configuration> = Dq::from([start]);
    while let Some(c) = queue.pop_front() {
        for v in g.ordinary_vertices() {
            let mut next = c.clone();
            next.0[v] += 1;
            let r = stabilize(g, &next, OrderPolicy::Fifo)?;
            if seen.insert(r.stable.0.clone()) {
                queue.push_back(r.stable);
            }
        }
    }
    Ok(seen.into_iter().map(Configuration).collect())
}
