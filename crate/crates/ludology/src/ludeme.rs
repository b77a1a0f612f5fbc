//! The ludeme catalog: named, reusable fragments of game logic that
//! descriptions can invoke, each evaluated at description-expansion time
//! into concrete slices or actions.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::ids::{ActionId, DecisionId, TrackId};
use crate::model::{CoordSpace, GameSystem, Slice};

#[derive(Debug, Error)]
pub enum LudemeError {
    #[error("ludeme '{0}' is already registered")]
    Duplicate(String),
    #[error("unknown ludeme '{0}'")]
    Unknown(String),
    #[error("ludeme '{name}' expects {expected} arguments, got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("argument {index} of '{name}': expected {expected}")]
    ArgKind { name: String, index: usize, expected: &'static str },
    #[error("{0}")]
    Eval(String),
}

/// Kinds a ludeme's arguments may take; the description expander resolves
/// names against the system accordingly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    TrackSet,
    Decision,
    Action,
    ValueName,
    Int,
}

impl ArgKind {
    pub fn label(self) -> &'static str {
        match self {
            ArgKind::TrackSet => "a track set",
            ArgKind::Decision => "a decision",
            ArgKind::Action => "an action",
            ArgKind::ValueName => "a value name",
            ArgKind::Int => "an integer",
        }
    }
}

/// A resolved argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LudemeArg {
    Tracks(Vec<TrackId>),
    Decision(DecisionId),
    Action(ActionId),
    Value(String),
    Int(i64),
}

/// What a ludeme evaluates to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LudemeValue {
    Slice(Slice),
    Action(ActionId),
}

type EvalFn = Arc<dyn Fn(&GameSystem, &[LudemeArg]) -> Result<LudemeValue, LudemeError> + Send + Sync>;

/// A catalog entry: name, signature, and a pure evaluator.
#[derive(Clone)]
pub struct Ludeme {
    pub name: String,
    pub signature: Vec<ArgKind>,
    pub summary: String,
    eval: EvalFn,
}

impl std::fmt::Debug for Ludeme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ludeme")
            .field("name", &self.name)
            .field("signature", &self.signature)
            .finish()
    }
}

impl Ludeme {
    pub fn new(
        name: &str,
        signature: Vec<ArgKind>,
        summary: &str,
        eval: impl Fn(&GameSystem, &[LudemeArg]) -> Result<LudemeValue, LudemeError> + Send + Sync + 'static,
    ) -> Self {
        Ludeme {
            name: name.to_string(),
            signature,
            summary: summary.to_string(),
            eval: Arc::new(eval),
        }
    }

    pub fn evaluate(&self, sys: &GameSystem, args: &[LudemeArg]) -> Result<LudemeValue, LudemeError> {
        if args.len() != self.signature.len() {
            return Err(LudemeError::Arity {
                name: self.name.clone(),
                expected: self.signature.len(),
                got: args.len(),
            });
        }
        (self.eval)(sys, args)
    }
}

/// Registry of ludemic functions. Append-only before parsing begins; reads
/// are shared thereafter.
#[derive(Debug, Clone)]
pub struct Catalog {
    entries: BTreeMap<String, Ludeme>,
}

impl Catalog {
    pub fn empty() -> Self {
        Catalog { entries: BTreeMap::new() }
    }

    /// The shipped catalog: `RPS`, `TripleSumsToZero`, and `NInARow`.
    pub fn builtin() -> Self {
        let mut c = Catalog::empty();
        c.register(Ludeme::new(
            "RPS",
            vec![ArgKind::Decision, ArgKind::Decision, ArgKind::Action, ArgKind::Action, ArgKind::Action],
            "RPS(d1, d2, a0, a1, a2): the action a_i with i = phi(d1) - phi(d2) mod 3, \
             over decisions with mod-3 coordinates",
            |sys, args| match args {
                [LudemeArg::Decision(d1), LudemeArg::Decision(d2), LudemeArg::Action(a0), LudemeArg::Action(a1), LudemeArg::Action(a2)] => {
                    rps_select(sys, *d1, *d2, *a0, *a1, *a2).map(LudemeValue::Action)
                }
                _ => Err(arg_error("RPS", args, &[ArgKind::Decision, ArgKind::Decision, ArgKind::Action, ArgKind::Action, ArgKind::Action])),
            },
        ))
        .unwrap();
        c.register(Ludeme::new(
            "TripleSumsToZero",
            vec![ArgKind::TrackSet, ArgKind::ValueName],
            "TripleSumsToZero(tracks, v): union of (v)_t1 (v)_t2 (v)_t3 over 3-subsets whose \
             integer track coordinates sum to zero",
            |sys, args| match args {
                [LudemeArg::Tracks(tracks), LudemeArg::Value(v)] => {
                    triple_sums_to_zero(sys, tracks, v).map(LudemeValue::Slice)
                }
                _ => Err(arg_error("TripleSumsToZero", args, &[ArgKind::TrackSet, ArgKind::ValueName])),
            },
        ))
        .unwrap();
        c.register(Ludeme::new(
            "NInARow",
            vec![ArgKind::TrackSet, ArgKind::ValueName, ArgKind::Int],
            "NInARow(tracks, v, n): union over unit-step lattice lines of length n of the \
             product slice assigning v along the line",
            |sys, args| match args {
                [LudemeArg::Tracks(tracks), LudemeArg::Value(v), LudemeArg::Int(n)] => {
                    if *n < 1 {
                        return Err(LudemeError::Eval("NInARow needs n >= 1".to_string()));
                    }
                    n_in_a_row(sys, tracks, v, *n as usize).map(LudemeValue::Slice)
                }
                _ => Err(arg_error("NInARow", args, &[ArgKind::TrackSet, ArgKind::ValueName, ArgKind::Int])),
            },
        ))
        .unwrap();
        c
    }

    pub fn register(&mut self, ludeme: Ludeme) -> Result<(), LudemeError> {
        if self.entries.contains_key(&ludeme.name) {
            return Err(LudemeError::Duplicate(ludeme.name));
        }
        self.entries.insert(ludeme.name.clone(), ludeme);
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Result<&Ludeme, LudemeError> {
        self.entries.get(name).ok_or_else(|| LudemeError::Unknown(name.to_string()))
    }

    pub fn entries(&self) -> impl Iterator<Item = &Ludeme> {
        self.entries.values()
    }
}

fn arg_error(name: &str, args: &[LudemeArg], expected: &[ArgKind]) -> LudemeError {
    for (i, (arg, kind)) in args.iter().zip(expected).enumerate() {
        let ok = matches!(
            (arg, kind),
            (LudemeArg::Tracks(_), ArgKind::TrackSet)
                | (LudemeArg::Decision(_), ArgKind::Decision)
                | (LudemeArg::Action(_), ArgKind::Action)
                | (LudemeArg::Value(_), ArgKind::ValueName)
                | (LudemeArg::Int(_), ArgKind::Int)
        );
        if !ok {
            return LudemeError::ArgKind { name: name.to_string(), index: i + 1, expected: kind.label() };
        }
    }
    LudemeError::Arity { name: name.to_string(), expected: expected.len(), got: args.len() }
}

/// Modular coordinate of a decision: its first modular coordinate
/// assignment. The null decision carries no coordinates, so it can never be
/// passed here.
fn decision_mod_coord(sys: &GameSystem, d: DecisionId, modulus: u64) -> Result<i64, LudemeError> {
    let dec = &sys.decisions[d.0];
    dec.coords
        .iter()
        .find_map(|c| match (&c.space, &c.coord) {
            (CoordSpace::Mod(m), crate::model::Coord::Mod(r)) if *m == modulus => Some(*r as i64),
            _ => None,
        })
        .ok_or_else(|| {
            LudemeError::Eval(format!(
                "decision '{}' has no mod-{} coordinate",
                dec.name, modulus
            ))
        })
}

/// Selects among three actions by the cyclic difference of two decisions'
/// mod-3 coordinates: returns `a_i` where `i = phi(d1) - phi(d2) mod 3`.
pub fn rps_select(
    sys: &GameSystem,
    d1: DecisionId,
    d2: DecisionId,
    a0: ActionId,
    a1: ActionId,
    a2: ActionId,
) -> Result<ActionId, LudemeError> {
    let p1 = decision_mod_coord(sys, d1, 3)?;
    let p2 = decision_mod_coord(sys, d2, 3)?;
    let i = (p1 - p2).rem_euclid(3);
    Ok([a0, a1, a2][i as usize])
}

/// Integer coordinate of a track (its first integer coordinate assignment).
fn track_int_coord(sys: &GameSystem, t: TrackId) -> Result<i64, LudemeError> {
    sys.tracks[t.0]
        .coords
        .iter()
        .find_map(|c| match (&c.space, &c.coord) {
            (CoordSpace::Int, crate::model::Coord::Int(k)) => Some(*k),
            _ => None,
        })
        .ok_or_else(|| {
            LudemeError::Eval(format!("track '{}' has no integer coordinate", sys.tracks[t.0].name))
        })
}

fn value_on(sys: &GameSystem, t: TrackId, value: &str) -> Result<crate::ids::ValueId, LudemeError> {
    sys.tracks[t.0].value_named(value).ok_or_else(|| {
        LudemeError::Eval(format!("track '{}' has no value '{}'", sys.tracks[t.0].name, value))
    })
}

/// Union of the slices `(v)_t1 (v)_t2 (v)_t3` over all 3-subsets of `tracks`
/// whose integer coordinates sum to zero.
pub fn triple_sums_to_zero(
    sys: &GameSystem,
    tracks: &[TrackId],
    value: &str,
) -> Result<Slice, LudemeError> {
    let coords: Vec<i64> = tracks
        .iter()
        .map(|&t| track_int_coord(sys, t))
        .collect::<Result<_, _>>()?;
    let mut disjuncts = Vec::new();
    for i in 0..tracks.len() {
        for j in i + 1..tracks.len() {
            for k in j + 1..tracks.len() {
                if coords[i] + coords[j] + coords[k] == 0 {
                    let parts = vec![
                        Slice::Is(tracks[i], value_on(sys, tracks[i], value)?),
                        Slice::Is(tracks[j], value_on(sys, tracks[j], value)?),
                        Slice::Is(tracks[k], value_on(sys, tracks[k], value)?),
                    ];
                    disjuncts.push(Slice::And(parts));
                }
            }
        }
    }
    Ok(Slice::or(disjuncts))
}

/// Lattice coordinate of a track (its first lattice assignment).
fn track_lattice_coord<'a>(sys: &'a GameSystem, t: TrackId) -> Result<&'a [i64], LudemeError> {
    sys.tracks[t.0]
        .coords
        .iter()
        .find_map(|c| c.coord.as_lattice())
        .ok_or_else(|| {
            LudemeError::Eval(format!("track '{}' has no lattice coordinate", sys.tracks[t.0].name))
        })
}

/// Union over all unit-step arithmetic progressions of length `n` on the
/// tracks' lattice coordinates of the product slice assigning `value` along
/// the progression. Directions cover the (3^d - 1)/2 classes, one of each
/// +/- pair.
pub fn n_in_a_row(
    sys: &GameSystem,
    tracks: &[TrackId],
    value: &str,
    n: usize,
) -> Result<Slice, LudemeError> {
    let mut dim = None;
    let mut points: BTreeMap<Vec<i64>, TrackId> = BTreeMap::new();
    for &t in tracks {
        let p = track_lattice_coord(sys, t)?.to_vec();
        match dim {
            None => dim = Some(p.len()),
            Some(d) if d == p.len() => {}
            Some(d) => {
                return Err(LudemeError::Eval(format!(
                    "inconsistent lattice dimensions {d} and {} on track '{}'",
                    p.len(),
                    sys.tracks[t.0].name
                )))
            }
        }
        points.insert(p, t);
    }
    let d = dim.unwrap_or(0);
    let mut lines: BTreeSet<Vec<TrackId>> = BTreeSet::new();
    for start in points.keys() {
        for dir in directions(d) {
            let mut line = Vec::with_capacity(n);
            let mut ok = true;
            for step in 0..n {
                let q: Vec<i64> =
                    start.iter().zip(&dir).map(|(s, v)| s + v * step as i64).collect();
                match points.get(&q) {
                    Some(&t) => line.push(t),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                line.sort();
                lines.insert(line);
            }
        }
    }
    let mut disjuncts = Vec::new();
    for line in lines {
        let mut parts = Vec::with_capacity(line.len());
        for t in line {
            parts.push(Slice::Is(t, value_on(sys, t, value)?));
        }
        disjuncts.push(Slice::and(parts));
    }
    Ok(Slice::or(disjuncts))
}

/// One representative of each +/- direction pair in {-1,0,1}^d \ {0}: the
/// representative's first nonzero component is positive.
fn directions(d: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut dir = vec![-1i64; d];
    loop {
        if let Some(first) = dir.iter().find(|&&v| v != 0) {
            if *first > 0 {
                out.push(dir.clone());
            }
        }
        // Odometer over {-1,0,1}^d.
        let mut i = d;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if dir[i] < 1 {
                dir[i] += 1;
                for v in dir[i + 1..].iter_mut() {
                    *v = -1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_classes() {
        assert_eq!(directions(1), vec![vec![1]]);
        assert_eq!(directions(2).len(), 4); // (3^2 - 1) / 2
        assert_eq!(directions(3).len(), 13); // (3^3 - 1) / 2
        for dir in directions(2) {
            assert!(*dir.iter().find(|&&v| v != 0).unwrap() > 0);
        }
    }

    #[test]
    fn registry_round_trip() {
        let mut c = Catalog::empty();
        c.register(Ludeme::new("X", vec![ArgKind::Int], "test", |_, _| {
            Ok(LudemeValue::Slice(Slice::All))
        }))
        .unwrap();
        assert!(c.lookup("X").is_ok());
        assert!(matches!(c.lookup("Y"), Err(LudemeError::Unknown(_))));
        let dup = c.register(Ludeme::new("X", vec![], "test", |_, _| {
            Ok(LudemeValue::Slice(Slice::All))
        }));
        assert!(matches!(dup, Err(LudemeError::Duplicate(_))));
    }

    #[test]
    fn builtin_catalog_is_exactly_three() {
        let names: Vec<String> = Catalog::builtin().entries().map(|l| l.name.clone()).collect();
        assert_eq!(names, vec!["NInARow", "RPS", "TripleSumsToZero"]);
    }
}
