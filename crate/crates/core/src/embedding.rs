//! Rotation-system planar embeddings.
//!
//! Each edge slot (one unit of multiplicity) owns two darts, `2s` and
//! `2s + 1`; `twin(d) = d ^ 1`. Rotations list the darts leaving a vertex in
//! counterclockwise order. Faces are orbits of `next(d) =
//! rotation_successor(twin(d))`, and an embedding is planar-consistent iff
//! Euler's formula `V - E + F = 2` holds.
//!
//! Builders place the sink at infinity: its rotation is the clockwise
//! boundary walk, i.e. the reverse of the counterclockwise walk collecting
//! each boundary vertex's outward slots.

use thiserror::Error;

use crate::graph::{SandpileGraph, VertexId};

pub type Dart = usize;
pub type SlotId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmbeddingError {
    #[error("rotation system violates Euler's formula: V={v} E={e} F={f}")]
    NonPlanarEmbedding { v: usize, e: usize, f: usize },
    #[error("dart {0} appears in no rotation or more than once")]
    BadRotation(Dart),
    #[error("embedding has no slots")]
    Empty,
}

#[derive(Debug, Clone)]
pub struct PlanarEmbedding {
    vertex_count: usize,
    slots: Vec<(VertexId, VertexId)>,
    rotations: Vec<Vec<Dart>>,
    dart_pos: Vec<(VertexId, u32)>,
    faces: Vec<Vec<Dart>>,
    face_of_dart: Vec<usize>,
    outer_face: usize,
}

impl PlanarEmbedding {
    /// Assemble and validate. `slots[s]` holds the origins of darts `2s`
    /// (tail `slots[s].0`) and `2s+1` (tail `slots[s].1`); `rotations[v]`
    /// lists all darts with origin `v` in counterclockwise order.
    pub fn new(
        vertex_count: usize,
        slots: Vec<(VertexId, VertexId)>,
        rotations: Vec<Vec<Dart>>,
    ) -> Result<Self, EmbeddingError> {
        if slots.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        let dart_count = 2 * slots.len();
        let mut dart_pos = vec![(usize::MAX, 0u32); dart_count];
        for (v, rot) in rotations.iter().enumerate() {
            for (k, &d) in rot.iter().enumerate() {
                if d >= dart_count || dart_pos[d].0 != usize::MAX {
                    return Err(EmbeddingError::BadRotation(d.min(dart_count)));
                }
                let expected_origin = if d % 2 == 0 { slots[d / 2].0 } else { slots[d / 2].1 };
                if expected_origin != v {
                    return Err(EmbeddingError::BadRotation(d));
                }
                dart_pos[d] = (v, k as u32);
            }
        }
        if let Some(d) = dart_pos.iter().position(|&(v, _)| v == usize::MAX) {
            return Err(EmbeddingError::BadRotation(d));
        }
        let mut emb = Self {
            vertex_count,
            slots,
            rotations,
            dart_pos,
            faces: Vec::new(),
            face_of_dart: Vec::new(),
            outer_face: 0,
        };
        emb.trace_faces();
        let (v, e, f) = (emb.vertex_count, emb.slots.len(), emb.faces.len());
        if v + f != e + 2 {
            return Err(EmbeddingError::NonPlanarEmbedding { v, e, f });
        }
        // outer face: by convention the face containing the highest dart
        // (builders put the sink's darts last)
        emb.outer_face = emb.face_of_dart[2 * emb.slots.len() - 1];
        Ok(emb)
    }

    fn trace_faces(&mut self) {
        let dart_count = 2 * self.slots.len();
        self.face_of_dart = vec![usize::MAX; dart_count];
        self.faces.clear();
        for d0 in 0..dart_count {
            if self.face_of_dart[d0] != usize::MAX {
                continue;
            }
            let id = self.faces.len();
            let mut cycle = Vec::new();
            let mut d = d0;
            while self.face_of_dart[d] == usize::MAX {
                self.face_of_dart[d] = id;
                cycle.push(d);
                d = self.next_in_face(d);
            }
            self.faces.push(cycle);
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slot_endpoints(&self, s: SlotId) -> (VertexId, VertexId) {
        self.slots[s]
    }

    pub fn twin(d: Dart) -> Dart {
        d ^ 1
    }

    pub fn dart_origin(&self, d: Dart) -> VertexId {
        self.dart_pos[d].0
    }

    pub fn dart_head(&self, d: Dart) -> VertexId {
        self.dart_pos[d ^ 1].0
    }

    /// Successor of `d` in its face orbit.
    pub fn next_in_face(&self, d: Dart) -> Dart {
        let t = d ^ 1;
        let (v, k) = self.dart_pos[t];
        let rot = &self.rotations[v];
        rot[(k as usize + 1) % rot.len()]
    }

    pub fn faces(&self) -> &[Vec<Dart>] {
        &self.faces
    }

    pub fn face_of(&self, d: Dart) -> usize {
        self.face_of_dart[d]
    }

    pub fn outer_face(&self) -> usize {
        self.outer_face
    }

    pub fn rotations(&self) -> &[Vec<Dart>] {
        &self.rotations
    }

    /// All slots with the given endpoints, in id order.
    pub fn slots_between(&self, u: VertexId, v: VertexId) -> Vec<SlotId> {
        (0..self.slots.len())
            .filter(|&s| {
                let (a, b) = self.slots[s];
                (a, b) == (u, v) || (a, b) == (v, u)
            })
            .collect()
    }

    /// Checks that slot counts per vertex pair match the graph's edge
    /// multiplicities.
    pub fn consistent_with(&self, g: &SandpileGraph) -> bool {
        if g.vertex_count() != self.vertex_count {
            return false;
        }
        let mut counts = std::collections::BTreeMap::new();
        for &(u, v) in &self.slots {
            *counts.entry((u.min(v), u.max(v))).or_insert(0u64) += 1;
        }
        g.edges()
            .iter()
            .all(|e| counts.get(&(e.u, e.v)) == Some(&e.multiplicity))
            && counts.len() == g.edges().len()
    }
}

/// Helper that accumulates slots/rotations before final validation.
pub struct EmbeddingBuilder {
    vertex_count: usize,
    slots: Vec<(VertexId, VertexId)>,
    rotations: Vec<Vec<Dart>>,
}

impl EmbeddingBuilder {
    pub fn new(vertex_count: usize) -> Self {
        Self {
            vertex_count,
            slots: Vec::new(),
            rotations: vec![Vec::new(); vertex_count],
        }
    }

    /// Reserve a slot; returns its id. Darts `2s` (origin `u`) and `2s+1`
    /// (origin `v`) must later be placed in the rotations.
    pub fn add_slot(&mut self, u: VertexId, v: VertexId) -> SlotId {
        self.slots.push((u, v));
        self.slots.len() - 1
    }

    pub fn set_rotation(&mut self, v: VertexId, darts: Vec<Dart>) {
        self.rotations[v] = darts;
    }

    pub fn finish(self) -> Result<PlanarEmbedding, EmbeddingError> {
        PlanarEmbedding::new(self.vertex_count, self.slots, self.rotations)
    }
}

/// `GRID_n` sandpile embedding with the sink at infinity.
pub fn grid_embedding(n: usize) -> PlanarEmbedding {
    use crate::graph::grid_vertex;
    let sink = n * n;
    let mut b = EmbeddingBuilder::new(n * n + 1);
    let mut grid_slot = std::collections::BTreeMap::new();
    let mut sink_slot = std::collections::BTreeMap::new();
    // directions in CCW order starting East; (di, dj) moves the (i, j) label
    const DIRS: [(i64, i64); 4] = [(0, 1), (-1, 0), (0, -1), (1, 0)];
    // i is the row (1 = bottom), j the column; East = +j, North = +i... rows
    // grow upward so CCW at a vertex is E, N, W, S = (+j), (+i), (-j), (-i)
    let dirs = [(1i64, 0i64), (0, 1), (-1, 0), (0, -1)]; // (dj, di)
    let _ = DIRS;
    for i in 1..=n {
        for j in 1..=n {
            let v = grid_vertex(n, i, j);
            let mut rot = Vec::with_capacity(4);
            for &(dj, di) in &dirs {
                let (a, bb) = (i as i64 + di, j as i64 + dj);
                if (1..=n as i64).contains(&a) && (1..=n as i64).contains(&bb) {
                    let u = grid_vertex(n, a as usize, bb as usize);
                    let key = (v.min(u), v.max(u));
                    let s = *grid_slot
                        .entry(key)
                        .or_insert_with(|| b.add_slot(key.0, key.1));
                    rot.push(if key.0 == v { 2 * s } else { 2 * s + 1 });
                } else {
                    let s = *sink_slot
                        .entry((v, (dj, di)))
                        .or_insert_with(|| b.add_slot(v, sink));
                    rot.push(2 * s);
                }
            }
            b.set_rotation(v, rot);
        }
    }
    // counterclockwise boundary walk collecting outward slots, then reversed
    // for the sink at infinity
    let mut walk: Vec<(usize, usize, (i64, i64))> = Vec::new();
    for j in 1..=n {
        walk.push((1, j, (0, -1))); // bottom row, outward = South
    }
    for i in 1..=n {
        walk.push((i, n, (1, 0))); // right column, outward = East
    }
    for j in (1..=n).rev() {
        walk.push((n, j, (0, 1))); // top row, outward = North
    }
    for i in (1..=n).rev() {
        walk.push((i, 1, (-1, 0))); // left column, outward = West
    }
    let mut sink_rot = Vec::new();
    for (i, j, d) in walk {
        let v = grid_vertex(n, i, j);
        if let Some(&s) = sink_slot.get(&(v, d)) {
            sink_rot.push(2 * s + 1);
        }
    }
    sink_rot.reverse();
    b.set_rotation(sink, sink_rot);
    b.finish().expect("grid embedding is planar")
}

/// Embedding for a lattice patch (or any graph) from planar coordinates,
/// sink at infinity. Ordinary rotations sort by angle; each vertex's sink
/// slots point radially outward from the centroid.
pub fn embed_with_coords(g: &SandpileGraph, coords: &[(f64, f64)]) -> PlanarEmbedding {
    let sink = g.sink();
    let n = g.vertex_count();
    assert_eq!(coords.len() + 1, n, "coords cover ordinary vertices");
    let cx = coords.iter().map(|c| c.0).sum::<f64>() / coords.len() as f64;
    let cy = coords.iter().map(|c| c.1).sum::<f64>() / coords.len() as f64;
    let mut b = EmbeddingBuilder::new(n);
    let mut slot_of = std::collections::BTreeMap::new();
    let mut sink_slots: Vec<Vec<SlotId>> = vec![Vec::new(); n];
    for e in g.edges() {
        if e.v == sink || e.u == sink {
            let v = if e.u == sink { e.v } else { e.u };
            for _ in 0..e.multiplicity {
                sink_slots[v].push(b.add_slot(v, sink));
            }
        } else {
            assert_eq!(e.multiplicity, 1, "lattice patches have simple interior edges");
            slot_of.insert((e.u, e.v), b.add_slot(e.u, e.v));
        }
    }
    // per-vertex rotations: angle-sorted darts; sink slots at the outward
    // radial angle, jittered so parallel slots stay distinct
    let mut sink_angles: Vec<(f64, SlotId, VertexId)> = Vec::new();
    for v in g.ordinary_vertices() {
        let (x, y) = coords[v];
        let mut darts: Vec<(f64, Dart)> = Vec::new();
        for &(u, _) in g.neighbors(v) {
            if u == sink {
                continue;
            }
            let key = (v.min(u), v.max(u));
            let s = slot_of[&key];
            let d = if key.0 == v { 2 * s } else { 2 * s + 1 };
            let (ux, uy) = coords[u];
            darts.push((normalize_angle((uy - y).atan2(ux - x)), d));
        }
        let out = (y - cy).atan2(x - cx);
        for (k, &s) in sink_slots[v].iter().enumerate() {
            let ang = out + (k as f64) * 1e-4;
            darts.push((normalize_angle(ang), 2 * s));
            sink_angles.push((normalize_angle(out + (k as f64) * 1e-4), s, v));
        }
        darts.sort_by(|a, b2| a.0.partial_cmp(&b2.0).unwrap());
        b.set_rotation(v, darts.into_iter().map(|(_, d)| d).collect());
    }
    // sink rotation: clockwise by angle around the centroid
    sink_angles.sort_by(|a, b2| {
        a.0.partial_cmp(&b2.0)
            .unwrap()
            .then(a.2.cmp(&b2.2))
            .then(a.1.cmp(&b2.1))
    });
    sink_angles.reverse();
    b.set_rotation(sink, sink_angles.into_iter().map(|(_, s, _)| 2 * s + 1).collect());
    b.finish().expect("coordinate embedding is planar")
}

fn normalize_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut x = a % two_pi;
    if x < 0.0 {
        x += two_pi;
    }
    x
}

/// An embedded resistive circuit: per-slot unit conductances unless changed.
#[derive(Debug, Clone)]
pub struct EmbeddedCircuit {
    pub embedding: PlanarEmbedding,
    /// Conductance per slot.
    pub conductance: Vec<f64>,
}

impl EmbeddedCircuit {
    pub fn unit(embedding: PlanarEmbedding) -> Self {
        let conductance = vec![1.0; embedding.slot_count()];
        Self {
            embedding,
            conductance,
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = (VertexId, VertexId, f64)> + '_ {
        (0..self.embedding.slot_count()).map(move |s| {
            let (u, v) = self.embedding.slot_endpoints(s);
            (u, v, self.conductance[s])
        })
    }
}

/// Plain n-by-n grid circuit (no sandpile sink): outer face is the boundary
/// ring. Vertex ids follow `grid_vertex`.
pub fn plain_grid_circuit(n: usize) -> EmbeddedCircuit {
    use crate::graph::grid_vertex;
    assert!(n >= 2);
    let mut b = EmbeddingBuilder::new(n * n);
    let mut slot_of = std::collections::BTreeMap::new();
    let dirs = [(1i64, 0i64), (0, 1), (-1, 0), (0, -1)]; // (dj, di) CCW
    for i in 1..=n {
        for j in 1..=n {
            let v = grid_vertex(n, i, j);
            let mut rot = Vec::new();
            for &(dj, di) in &dirs {
                let (a, bb) = (i as i64 + di, j as i64 + dj);
                if (1..=n as i64).contains(&a) && (1..=n as i64).contains(&bb) {
                    let u = grid_vertex(n, a as usize, bb as usize);
                    let key = (v.min(u), v.max(u));
                    let s = *slot_of
                        .entry(key)
                        .or_insert_with(|| b.add_slot(key.0, key.1));
                    rot.push(if key.0 == v { 2 * s } else { 2 * s + 1 });
                }
            }
            b.set_rotation(v, rot);
        }
    }
    let emb = b.finish().expect("plain grid is planar");
    EmbeddedCircuit::unit(emb)
}

/// Cycle circuit on `n` vertices; two faces.
pub fn cycle_circuit(n: usize) -> EmbeddedCircuit {
    assert!(n >= 3);
    let mut b = EmbeddingBuilder::new(n);
    let slots: Vec<SlotId> = (0..n).map(|i| b.add_slot(i, (i + 1) % n)).collect();
    for v in 0..n {
        let fwd = 2 * slots[v];
        let back = 2 * slots[(v + n - 1) % n] + 1;
        b.set_rotation(v, vec![fwd, back]);
    }
    EmbeddedCircuit::unit(b.finish().expect("cycle is planar"))
}

/// Triangle sandpile (3 vertices, one of them the sink) embedding.
pub fn triangle_embedding() -> PlanarEmbedding {
    let mut b = EmbeddingBuilder::new(3);
    let s01 = b.add_slot(0, 1);
    let s12 = b.add_slot(1, 2);
    let s02 = b.add_slot(0, 2);
    b.set_rotation(0, vec![2 * s01, 2 * s02]);
    b.set_rotation(1, vec![2 * s12, 2 * s01 + 1]);
    b.set_rotation(2, vec![2 * s02 + 1, 2 * s12 + 1]);
    b.finish().expect("triangle is planar")
}
