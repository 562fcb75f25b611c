//! Abelian sandpile dynamics together with the harmonic-function and
//! electrical-network machinery used to estimate transience-class and
//! sandpile-impedance quantities, cross-validated against exact simulation.

pub mod dual;
pub mod embedding;
pub mod engine;
pub mod graph;
pub mod harmonic;
pub mod reduction;
pub mod solver;

pub use engine::{Configuration, Impedance, OrderPolicy, ScoreVector, StabilizeResult};
pub use graph::{build_graph, grid, grid_vertex, honeycomb, triangular, SandpileGraph, VertexId};
