//! State slices: Boolean expressions denoting subsets of state space.
//!
//! Atoms test the value of a single track, either directly (`(v)@t`), against
//! a set of values, or through a coordinate comparison compiled from a
//! Boolean bracket. Products, sums, and complements combine atoms into
//! arbitrary subsets of the state space.

use serde::{Deserialize, Serialize};

use crate::ids::{TrackId, ValueId};
use crate::model::state::GameState;

/// A Boolean expression over track-value atoms. Evaluation is pure and total
/// once the slice has been resolved against its owning system.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slice {
    /// The whole state space.
    All,
    /// The empty set.
    Empty,
    /// Track takes exactly this value.
    Is(TrackId, ValueId),
    /// Track takes one of these values.
    InSet(TrackId, Vec<ValueId>),
    /// A coordinate comparison evaluated against the current state.
    Cmp(CmpAtom),
    Not(Box<Slice>),
    And(Vec<Slice>),
    Or(Vec<Slice>),
}

/// Comparison operators available inside Boolean brackets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn apply(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    /// True for the order comparisons, which only make sense on the integers.
    pub fn is_ordering(self) -> bool {
        !matches!(self, CmpOp::Eq | CmpOp::Ne)
    }
}

/// A compiled Boolean bracket: compares two coordinate expressions, read from
/// the pre-state, in the coordinate space selected by `coord_index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmpAtom {
    pub lhs: CoordExpr,
    pub op: CmpOp,
    pub rhs: CoordExpr,
    /// 0-based index into the referenced tracks' value-coordinate lists.
    pub coord_index: usize,
    /// Modulus when the selected space is modular; comparisons then reduce
    /// both sides first.
    pub modulus: Option<u64>,
}

/// Integer arithmetic over value coordinates of tracks at the current state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoordExpr {
    Const(i64),
    /// Coordinate (at the atom's `coord_index`) of the value currently held
    /// by this track.
    ValueCoord(TrackId),
    Add(Box<CoordExpr>, Box<CoordExpr>),
    Sub(Box<CoordExpr>, Box<CoordExpr>),
    Neg(Box<CoordExpr>),
}

impl CoordExpr {
    /// Tracks referenced by the expression, used during validation.
    pub fn tracks(&self, out: &mut Vec<TrackId>) {
        match self {
            CoordExpr::Const(_) => {}
            CoordExpr::ValueCoord(t) => out.push(*t),
            CoordExpr::Add(a, b) | CoordExpr::Sub(a, b) => {
                a.tracks(out);
                b.tracks(out);
            }
            CoordExpr::Neg(a) => a.tracks(out),
        }
    }
}

impl Slice {
    /// Normalizing product constructor: flattens nested products.
    pub fn and(parts: Vec<Slice>) -> Slice {
        let mut flat = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Slice::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Slice::All,
            1 => flat.into_iter().next().unwrap(),
            _ => Slice::And(flat),
        }
    }

    /// Normalizing sum constructor: flattens nested sums.
    pub fn or(parts: Vec<Slice>) -> Slice {
        let mut flat = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Slice::Or(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Slice::Empty,
            1 => flat.into_iter().next().unwrap(),
            _ => Slice::Or(flat),
        }
    }

    pub fn not(self) -> Slice {
        Slice::Not(Box::new(self))
    }

    /// All tracks mentioned anywhere in the slice.
    pub fn referenced_tracks(&self, out: &mut Vec<TrackId>) {
        match self {
            Slice::All | Slice::Empty => {}
            Slice::Is(t, _) | Slice::InSet(t, _) => out.push(*t),
            Slice::Cmp(atom) => {
                atom.lhs.tracks(out);
                atom.rhs.tracks(out);
            }
            Slice::Not(inner) => inner.referenced_tracks(out),
            Slice::And(parts) | Slice::Or(parts) => {
                for p in parts {
                    p.referenced_tracks(out);
                }
            }
        }
    }

    /// Membership test for `state`, given a coordinate lookup for the `Cmp`
    /// atoms. The lookup receives (track, coord index) and must return the
    /// scalar coordinate of the track's current value.
    pub(crate) fn eval_with(
        &self,
        state: &GameState,
        lookup: &impl Fn(TrackId, usize, &GameState) -> i64,
    ) -> bool {
        match self {
            Slice::All => true,
            Slice::Empty => false,
            Slice::Is(t, v) => state.value(*t) == *v,
            Slice::InSet(t, vs) => vs.contains(&state.value(*t)),
            Slice::Cmp(atom) => {
                let l = eval_expr(&atom.lhs, atom.coord_index, state, lookup);
                let r = eval_expr(&atom.rhs, atom.coord_index, state, lookup);
                let (l, r) = match atom.modulus {
                    Some(m) => (l.rem_euclid(m as i64), r.rem_euclid(m as i64)),
                    None => (l, r),
                };
                atom.op.apply(l, r)
            }
            Slice::Not(inner) => !inner.eval_with(state, lookup),
            Slice::And(parts) => parts.iter().all(|p| p.eval_with(state, lookup)),
            Slice::Or(parts) => parts.iter().any(|p| p.eval_with(state, lookup)),
        }
    }
}

fn eval_expr(
    expr: &CoordExpr,
    coord_index: usize,
    state: &GameState,
    lookup: &impl Fn(TrackId, usize, &GameState) -> i64,
) -> i64 {
    match expr {
        CoordExpr::Const(k) => *k,
        CoordExpr::ValueCoord(t) => lookup(*t, coord_index, state),
        CoordExpr::Add(a, b) => {
            eval_expr(a, coord_index, state, lookup) + eval_expr(b, coord_index, state, lookup)
        }
        CoordExpr::Sub(a, b) => {
            eval_expr(a, coord_index, state, lookup) - eval_expr(b, coord_index, state, lookup)
        }
        CoordExpr::Neg(a) => -eval_expr(a, coord_index, state, lookup),
    }
}
