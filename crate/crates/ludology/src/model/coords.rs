//! Coordinate spaces.
//!
//! Elements of a game description (tracks, track values, decisions, ...) may
//! carry coordinates: elements of some mathematical object whose structure is
//! available for use in the description, e.g. integer arithmetic for counters
//! or modular arithmetic for cyclic turn tracks. An element may carry several
//! coordinate assignments; order matters, and operators select one by its
//! 1-based index.

use serde::{Deserialize, Serialize};

/// The mathematical object a coordinate lives in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordSpace {
    /// The ring of integers.
    Int,
    /// Integers modulo `m` (m >= 1).
    Mod(u64),
    /// The integer lattice of the given dimension (d >= 1).
    Lattice(usize),
    /// An explicit finite graph; coordinates are node indices and the only
    /// available structure is adjacency.
    Graph(GraphSpace),
}

/// Node-and-edge description of an explicit graph coordinate space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpace {
    pub nodes: Vec<String>,
    /// Undirected adjacency, as pairs of node indices.
    pub edges: Vec<(usize, usize)>,
}

impl GraphSpace {
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.edges.iter().any(|&(x, y)| (x == a && y == b) || (x == b && y == a))
    }
}

/// A single coordinate: one element of its space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coord {
    Int(i64),
    /// Residue in a modular ring.
    Mod(u64),
    Lattice(Vec<i64>),
    /// Node index of a graph space.
    Node(usize),
}

impl Coord {
    /// Scalar view used by coordinate arithmetic. Lattice and graph
    /// coordinates are not scalars.
    pub fn as_scalar(&self) -> Option<i64> {
        match self {
            Coord::Int(k) => Some(*k),
            Coord::Mod(r) => Some(*r as i64),
            _ => None,
        }
    }

    pub fn as_lattice(&self) -> Option<&[i64]> {
        match self {
            Coord::Lattice(v) => Some(v),
            _ => None,
        }
    }
}

/// One coordinate assignment on a single element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordAssignment {
    pub space: CoordSpace,
    pub coord: Coord,
}

impl CoordAssignment {
    pub fn int(k: i64) -> Self {
        CoordAssignment { space: CoordSpace::Int, coord: Coord::Int(k) }
    }

    pub fn modular(m: u64, r: i64) -> Self {
        CoordAssignment { space: CoordSpace::Mod(m), coord: Coord::Mod(r.rem_euclid(m as i64) as u64) }
    }

    pub fn lattice(point: Vec<i64>) -> Self {
        CoordAssignment { space: CoordSpace::Lattice(point.len()), coord: Coord::Lattice(point) }
    }
}

/// Reduces `x` into the canonical representative of its space: the residue
/// for modular rings, `x` itself for the integers.
pub fn normalize(space: &CoordSpace, x: i64) -> i64 {
    match space {
        CoordSpace::Mod(m) => x.rem_euclid(*m as i64),
        _ => x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modular_normalization() {
        assert_eq!(normalize(&CoordSpace::Mod(5), 7), 2);
        assert_eq!(normalize(&CoordSpace::Mod(5), -1), 4);
        assert_eq!(normalize(&CoordSpace::Mod(3), -4), 2);
        assert_eq!(normalize(&CoordSpace::Int, -4), -4);
    }

    #[test]
    fn scalar_views() {
        assert_eq!(Coord::Int(-3).as_scalar(), Some(-3));
        assert_eq!(Coord::Mod(4).as_scalar(), Some(4));
        assert_eq!(Coord::Lattice(vec![1, 2]).as_scalar(), None);
    }
}
