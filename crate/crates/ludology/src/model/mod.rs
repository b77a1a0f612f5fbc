//! In-memory representation and evaluation semantics of a game system.
//!
//! A game system with `n` players bundles: the player list, the substate
//! tracks whose product forms the state space, a set of initial conditions,
//! the decisions players may choose, the actions that transform states, a
//! consequence function from decision tuples to probability-weighted actions,
//! a legality function, and the outcome map on terminal states. Ending
//! states and tag/coordinate annotations from the structured notation are
//! carried alongside.
//!
//! All values here are immutable after construction; every operation is a
//! pure function of the system and a state, so systems can be shared freely
//! across threads.

pub mod analysis;
pub mod coords;
pub mod slice;
pub mod state;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ActionId, DecisionId, OutcomeId, PlayerId, TrackId, ValueId, D0};
use crate::rational::Prob;
pub use coords::{Coord, CoordAssignment, CoordSpace, GraphSpace};
pub use slice::{CmpAtom, CmpOp, CoordExpr, Slice};
pub use state::{space_size, GameState, StateSpaceIter};

/// An agent that may make decisions in the game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Player {
    pub name: String,
    pub tags: BTreeSet<String>,
}

/// One value of a substate track.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackValue {
    pub name: String,
    pub tags: BTreeSet<String>,
}

/// One coordinate assignment covering every value of a track.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueCoords {
    pub space: CoordSpace,
    /// Index-aligned with the track's value list.
    pub coords: Vec<Coord>,
}

/// A substate track: one finite factor of the state space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Track {
    pub name: String,
    pub tags: BTreeSet<String>,
    pub values: Vec<TrackValue>,
    /// Coordinates of the track itself (e.g. its cell on a grid).
    pub coords: Vec<CoordAssignment>,
    /// Ordered coordinate assignments on the track's values; operators select
    /// one by index.
    pub value_coords: Vec<ValueCoords>,
}

impl Track {
    pub fn value_named(&self, name: &str) -> Option<ValueId> {
        self.values.iter().position(|v| v.name == name).map(ValueId)
    }

    /// Scalar coordinate of a value at the given coordinate index.
    pub fn value_scalar(&self, value: ValueId, index: usize) -> Option<i64> {
        self.value_coords.get(index)?.coords.get(value.0)?.as_scalar()
    }

    /// Finds the value whose coordinate at `index` equals `target`, reducing
    /// `target` into the space first (modular wrap).
    pub fn value_with_scalar(&self, index: usize, target: i64) -> Option<ValueId> {
        let assignment = self.value_coords.get(index)?;
        let target = coords::normalize(&assignment.space, target);
        assignment
            .coords
            .iter()
            .position(|c| c.as_scalar() == Some(target))
            .map(ValueId)
    }
}

/// A choice a player may make. Decisions influence the state only through
/// the consequence function; they never modify it directly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub name: String,
    pub tags: BTreeSet<String>,
    pub coords: Vec<CoordAssignment>,
}

/// Right-hand side of one action write.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum WriteExpr {
    /// Assign this literal value.
    Value(ValueId),
    /// Assign the value whose coordinate (at `index`, 0-based) equals the
    /// expression, evaluated against the pre-state. Wraps in modular spaces.
    Coord { index: usize, expr: CoordExpr },
}

/// One write of an action clause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Write {
    pub track: TrackId,
    pub expr: WriteExpr,
}

/// A guarded group of writes. The first clause whose guard contains the
/// state fires; all its writes read the pre-state and apply simultaneously.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionClause {
    pub guard: Slice,
    pub writes: Vec<Write>,
}

/// A state transformer. An action with no clauses, or applied to a state
/// outside every guard, is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub name: String,
    pub tags: BTreeSet<String>,
    pub clauses: Vec<ActionClause>,
}

/// Pattern over one slot of a decision tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionPattern {
    /// Matches anything, including the null decision.
    Any,
    /// Matches only the null decision.
    Null,
    Is(DecisionId),
}

impl DecisionPattern {
    pub fn matches(&self, slot: D0) -> bool {
        match self {
            DecisionPattern::Any => true,
            DecisionPattern::Null => slot.is_none(),
            DecisionPattern::Is(d) => slot == Some(*d),
        }
    }
}

/// One weighted consequence: a probability and a composition of actions
/// applied left to right.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consequence {
    #[serde(with = "crate::rational::serde_prob")]
    pub weight: Prob,
    pub actions: Vec<ActionId>,
}

/// Maps matching (decision tuple, state) pairs to a nonempty set of weighted
/// consequences. Weights must sum to exactly 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsequenceRule {
    /// One pattern per player.
    pub pattern: Vec<DecisionPattern>,
    pub guard: Slice,
    pub consequences: Vec<Consequence>,
}

impl ConsequenceRule {
    pub fn matches(&self, tuple: &[D0]) -> bool {
        self.pattern.len() == tuple.len()
            && self.pattern.iter().zip(tuple).all(|(p, &d)| p.matches(d))
    }
}

/// Pattern over players in a legality rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlayerPattern {
    Any,
    Is(PlayerId),
}

impl PlayerPattern {
    pub fn matches(&self, p: PlayerId) -> bool {
        match self {
            PlayerPattern::Any => true,
            PlayerPattern::Is(q) => p == *q,
        }
    }
}

/// Pattern over decisions in a legality rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionSelector {
    Any,
    Is(DecisionId),
    /// All decisions carrying this tag.
    Tagged(String),
}

/// A partial legality restriction. The effective legality of `(p, d)` is the
/// intersection of the slices of every matching rule, further intersected
/// with the complement of the ending states. A pair matched by no rule at
/// all is undefined: illegal at runtime and reported by the completeness
/// analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegalityRule {
    pub player: PlayerPattern,
    pub decision: DecisionSelector,
    pub slice: Slice,
    /// An `otherwise` rule applies only to pairs matched by no ordinary rule.
    pub otherwise: bool,
}

/// Maps a slice of terminal states to an outcome. Rules are checked in
/// declaration order; the first match wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRule {
    pub slice: Slice,
    pub outcome: OutcomeId,
}

/// How initial conditions were declared, kept for serialization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialSpec {
    Slice(Slice),
    States(Vec<GameState>),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("action '{action}' writes an undeclared value to track '{track}' (coordinate {index} = {target})")]
    ActionRange { action: String, track: String, index: usize, target: i64 },
    #[error("no consequence rule matches decision tuple {tuple} at state {state}")]
    NoConsequence { tuple: String, state: String },
    #[error("outcome undefined at terminal state {state}")]
    NoOutcome { state: String },
    #[error("state has {got} track values but the system has {expected} tracks")]
    StateArity { got: usize, expected: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Everything derivable from the declarations, rebuilt by `finalize`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Compiled {
    /// `[player][decision]` -> indices of matching legality rules, or `None`
    /// when the pair is matched by no rule (undefined legality).
    legality: Vec<Vec<Option<Vec<usize>>>>,
}

/// A complete in-memory game system.
///
/// Construct through [`crate::model::builder::SystemBuilder`] or by parsing a
/// description; both validate invariants and precompile lookup tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameSystem {
    pub name: String,
    pub players: Vec<Player>,
    pub tracks: Vec<Track>,
    pub initial_spec: InitialSpec,
    /// Enumerated initial conditions; nonempty.
    pub initial: Vec<GameState>,
    pub decisions: Vec<Decision>,
    pub actions: Vec<Action>,
    /// Decisions correspond one to one with actions and the consequence
    /// function maps each decision to its action with probability 1.
    pub trivial_consequences: bool,
    pub consequence_rules: Vec<ConsequenceRule>,
    pub legality_rules: Vec<LegalityRule>,
    /// Ending states: the game ends here even if decisions would otherwise
    /// be legal. May be `Empty`.
    pub ending: Slice,
    pub outcomes: Vec<String>,
    pub outcome_rules: Vec<OutcomeRule>,
    pub default_outcome: Option<OutcomeId>,
    #[serde(skip)]
    pub(crate) compiled: Compiled,
}

impl PartialEq for GameSystem {
    fn eq(&self, other: &Self) -> bool {
        // `initial_spec` records how the initial conditions were written;
        // the enumerated `initial` carries their meaning, so two systems
        // with the same enumeration are structurally identical.
        self.name == other.name
            && self.players == other.players
            && self.tracks == other.tracks
            && self.initial == other.initial
            && self.decisions == other.decisions
            && self.actions == other.actions
            && self.trivial_consequences == other.trivial_consequences
            && self.consequence_rules == other.consequence_rules
            && self.legality_rules == other.legality_rules
            && self.ending == other.ending
            && self.outcomes == other.outcomes
            && self.outcome_rules == other.outcome_rules
            && self.default_outcome == other.default_outcome
    }
}

impl Eq for GameSystem {}

impl GameSystem {
    /// Rebuilds the precompiled lookup tables. Called by the builder and
    /// after deserialization.
    pub(crate) fn finalize(&mut self) {
        let mut legality = Vec::with_capacity(self.players.len());
        for p in 0..self.players.len() {
            let mut row = Vec::with_capacity(self.decisions.len());
            for d in 0..self.decisions.len() {
                row.push(self.matching_rules(PlayerId(p), DecisionId(d)));
            }
            legality.push(row);
        }
        self.compiled = Compiled { legality };
    }

    fn matching_rules(&self, p: PlayerId, d: DecisionId) -> Option<Vec<usize>> {
        let decision = &self.decisions[d.0];
        let hit = |rule: &LegalityRule| {
            rule.player.matches(p)
                && match &rule.decision {
                    DecisionSelector::Any => true,
                    DecisionSelector::Is(x) => *x == d,
                    DecisionSelector::Tagged(t) => decision.tags.contains(t),
                }
        };
        let ordinary: Vec<usize> = self
            .legality_rules
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.otherwise && hit(r))
            .map(|(i, _)| i)
            .collect();
        if !ordinary.is_empty() {
            return Some(ordinary);
        }
        let fallback: Vec<usize> = self
            .legality_rules
            .iter()
            .enumerate()
            .filter(|(_, r)| r.otherwise && hit(r))
            .map(|(i, _)| i)
            .collect();
        if fallback.is_empty() {
            None
        } else {
            Some(fallback)
        }
    }

    // ------------------------------------------------------------------
    // Lookup helpers
    // ------------------------------------------------------------------

    pub fn player_named(&self, name: &str) -> Option<PlayerId> {
        self.players.iter().position(|p| p.name == name).map(PlayerId)
    }

    pub fn track_named(&self, name: &str) -> Option<TrackId> {
        self.tracks.iter().position(|t| t.name == name).map(TrackId)
    }

    pub fn decision_named(&self, name: &str) -> Option<DecisionId> {
        self.decisions.iter().position(|d| d.name == name).map(DecisionId)
    }

    pub fn action_named(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a.name == name).map(ActionId)
    }

    pub fn outcome_named(&self, name: &str) -> Option<OutcomeId> {
        self.outcomes.iter().position(|o| o == name).map(OutcomeId)
    }

    /// Tracks carrying every one of the given tags, in track order.
    pub fn tracks_tagged(&self, tags: &[&str]) -> Vec<TrackId> {
        self.tracks
            .iter()
            .enumerate()
            .filter(|(_, t)| tags.iter().all(|tag| t.tags.contains(*tag)))
            .map(|(i, _)| TrackId(i))
            .collect()
    }

    /// Size of the full product state space, saturating at `u64::MAX`.
    pub fn state_space_size(&self) -> u64 {
        space_size(&self.tracks.iter().map(|t| t.values.len()).collect::<Vec<_>>())
    }

    /// Iterates the full product state space.
    pub fn state_space(&self) -> StateSpaceIter {
        StateSpaceIter::new(self.tracks.iter().map(|t| t.values.len()).collect())
    }

    /// Builds a state from `track name -> value name` pairs; every track must
    /// be assigned exactly once.
    pub fn state_from_pairs(&self, pairs: &[(&str, &str)]) -> Result<GameState, ModelError> {
        let mut values = vec![None; self.tracks.len()];
        for (tname, vname) in pairs {
            let t = self
                .track_named(tname)
                .ok_or_else(|| ModelError::Invalid(format!("unknown track '{tname}'")))?;
            let v = self.tracks[t.0]
                .value_named(vname)
                .ok_or_else(|| ModelError::Invalid(format!("unknown value '{vname}' on track '{tname}'")))?;
            values[t.0] = Some(v);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| ModelError::Invalid(format!("track '{}' unassigned", self.tracks[i].name))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GameState::new(values))
    }

    /// Renders a state as `track=value` pairs.
    pub fn render_state(&self, s: &GameState) -> String {
        let parts: Vec<String> = self
            .tracks
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{}={}", t.name, t.values[s.value(TrackId(i)).0].name))
            .collect();
        parts.join(",")
    }

    /// Renders a decision tuple as `(d1,0,d2)`, with `0` for null slots.
    pub fn render_tuple(&self, tuple: &[D0]) -> String {
        let parts: Vec<&str> = tuple
            .iter()
            .map(|slot| match slot {
                Some(d) => self.decisions[d.0].name.as_str(),
                None => "0",
            })
            .collect();
        format!("({})", parts.join(","))
    }

    fn scalar_lookup(&self) -> impl Fn(TrackId, usize, &GameState) -> i64 + '_ {
        |track, index, state| {
            self.tracks[track.0]
                .value_scalar(state.value(track), index)
                .expect("validated slice refers to a scalar coordinate")
        }
    }

    // ------------------------------------------------------------------
    // Core operations
    // ------------------------------------------------------------------

    /// True iff `s` lies in the subset denoted by `slice`.
    pub fn eval_slice(&self, slice: &Slice, s: &GameState) -> bool {
        slice.eval_with(s, &self.scalar_lookup())
    }

    /// States of the full space contained in `slice`, up to `cap` results.
    /// Returns `None` if the space could not be enumerated within the cap.
    pub fn states_in_slice(&self, slice: &Slice, cap: u64) -> Option<Vec<GameState>> {
        if self.state_space_size() > cap {
            return None;
        }
        Some(self.state_space().filter(|s| self.eval_slice(slice, s)).collect())
    }

    /// Applies an action: the first clause whose guard contains `s` fires,
    /// with every write reading the pre-state. States outside all guards are
    /// returned unchanged.
    pub fn apply_action(&self, action: ActionId, s: &GameState) -> Result<GameState, ModelError> {
        let act = &self.actions[action.0];
        for clause in &act.clauses {
            if !self.eval_slice(&clause.guard, s) {
                continue;
            }
            let mut out = s.clone();
            for write in &clause.writes {
                let track = &self.tracks[write.track.0];
                let value = match &write.expr {
                    WriteExpr::Value(v) => *v,
                    WriteExpr::Coord { index, expr } => {
                        let target = eval_write_expr(self, expr, *index, s);
                        track.value_with_scalar(*index, target).ok_or_else(|| {
                            ModelError::ActionRange {
                                action: act.name.clone(),
                                track: track.name.clone(),
                                index: index + 1,
                                target,
                            }
                        })?
                    }
                };
                out.set(write.track, value);
            }
            return Ok(out);
        }
        Ok(s.clone())
    }

    /// Applies a composition of actions left to right.
    pub fn apply_composition(&self, actions: &[ActionId], s: &GameState) -> Result<GameState, ModelError> {
        let mut current = s.clone();
        for &a in actions {
            current = self.apply_action(a, &current)?;
        }
        Ok(current)
    }

    /// The legal set of decisions for `p` at `s`: every decision whose
    /// effective legality slice contains `s`. Empty whenever `s` is an
    /// ending state.
    pub fn legal_set(&self, p: PlayerId, s: &GameState) -> Vec<DecisionId> {
        if self.eval_slice(&self.ending, s) {
            return Vec::new();
        }
        (0..self.decisions.len())
            .map(DecisionId)
            .filter(|&d| self.is_legal_inner(p, d, s))
            .collect()
    }

    fn is_legal_inner(&self, p: PlayerId, d: DecisionId, s: &GameState) -> bool {
        match &self.compiled.legality[p.0][d.0] {
            None => false,
            Some(rules) => rules.iter().all(|&i| self.eval_slice(&self.legality_rules[i].slice, s)),
        }
    }

    /// True iff `(p, d)` is matched by at least one legality rule.
    pub fn legality_defined(&self, p: PlayerId, d: DecisionId) -> bool {
        self.compiled.legality[p.0][d.0].is_some()
    }

    /// True iff no player has any legal decision at `s`.
    pub fn is_terminal(&self, s: &GameState) -> bool {
        (0..self.players.len()).all(|p| self.legal_set(PlayerId(p), s).is_empty())
    }

    /// Legal sets for every player at once.
    pub fn legal_sets(&self, s: &GameState) -> Vec<Vec<DecisionId>> {
        (0..self.players.len()).map(|p| self.legal_set(PlayerId(p), s)).collect()
    }

    /// Resolves the consequence set of a decision tuple at a state: the first
    /// matching rule's weighted consequences, or the trivial singleton for
    /// systems declared `decisions ~ actions`.
    pub fn resolve_consequence(
        &self,
        tuple: &[D0],
        s: &GameState,
    ) -> Result<Vec<Consequence>, ModelError> {
        if tuple.len() != self.players.len() {
            return Err(ModelError::Invalid(format!(
                "decision tuple has {} slots for {} players",
                tuple.len(),
                self.players.len()
            )));
        }
        for rule in &self.consequence_rules {
            if rule.matches(tuple) && self.eval_slice(&rule.guard, s) {
                return Ok(rule.consequences.clone());
            }
        }
        if self.trivial_consequences {
            let non_null: Vec<DecisionId> = tuple.iter().flatten().copied().collect();
            if non_null.len() == 1 {
                return Ok(vec![Consequence {
                    weight: Prob::from_integer(1.into()),
                    actions: vec![ActionId(non_null[0].0)],
                }]);
            }
        }
        Err(ModelError::NoConsequence {
            tuple: self.render_tuple(tuple),
            state: self.render_state(s),
        })
    }

    /// Outcome at a terminal state: first matching rule, then the declared
    /// default. Ambiguity between rules is tolerated here (first match wins)
    /// and surfaced by the completeness analysis instead.
    pub fn outcome_of(&self, s: &GameState) -> Result<OutcomeId, ModelError> {
        for rule in &self.outcome_rules {
            if self.eval_slice(&rule.slice, s) {
                return Ok(rule.outcome);
            }
        }
        self.default_outcome
            .ok_or_else(|| ModelError::NoOutcome { state: self.render_state(s) })
    }

    /// All outcome rules matching `s`, for ambiguity analysis.
    pub fn matching_outcomes(&self, s: &GameState) -> Vec<OutcomeId> {
        self.outcome_rules
            .iter()
            .filter(|r| self.eval_slice(&r.slice, s))
            .map(|r| r.outcome)
            .collect()
    }
}

fn eval_write_expr(sys: &GameSystem, expr: &CoordExpr, index: usize, s: &GameState) -> i64 {
    match expr {
        CoordExpr::Const(k) => *k,
        CoordExpr::ValueCoord(t) => sys.tracks[t.0]
            .value_scalar(s.value(*t), index)
            .expect("validated write refers to a scalar coordinate"),
        CoordExpr::Add(a, b) => {
            eval_write_expr(sys, a, index, s) + eval_write_expr(sys, b, index, s)
        }
        CoordExpr::Sub(a, b) => {
            eval_write_expr(sys, a, index, s) - eval_write_expr(sys, b, index, s)
        }
        CoordExpr::Neg(a) => -eval_write_expr(sys, a, index, s),
    }
}

pub mod builder;
