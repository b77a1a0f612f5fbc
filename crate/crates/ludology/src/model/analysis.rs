//! Completeness and overcompleteness analysis.

use serde::{Deserialize, Serialize};

use crate::ids::{DecisionId, OutcomeId, PlayerId, D0};
use crate::model::{GameState, GameSystem};

/// A decision tuple plus an example state where the consequence function is
/// undefined or fails to evaluate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsequenceGap {
    pub tuple: Vec<D0>,
    pub rendered_tuple: String,
    pub state: String,
    pub detail: String,
}

/// A terminal state where the outcome map is undefined or ambiguous.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeGap {
    pub state: String,
    pub outcomes: Vec<OutcomeId>,
    pub ambiguous: bool,
}

/// Result of the completeness analysis: the system is complete iff the
/// gameplay loop can always be performed faithfully from every initial
/// condition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletenessReport {
    /// Required components (players, tracks, initial, decisions, actions,
    /// outcomes when reachable terminals exist) that are empty.
    pub empty_components: Vec<String>,
    /// Player-decision pairs matched by no legality rule.
    pub unruled_pairs: Vec<(PlayerId, DecisionId)>,
    /// Legally accessible (tuple, state) pairs with undefined consequences.
    pub consequence_gaps: Vec<ConsequenceGap>,
    /// Legally accessible terminal states with undefined or ambiguous
    /// outcomes.
    pub outcome_gaps: Vec<OutcomeGap>,
    /// Benign observations: ambiguity confined to legally inaccessible
    /// states. These do not affect the verdict.
    pub notes: Vec<String>,
    /// False when the reachable set exceeded the configured cap, making the
    /// report partial.
    pub reachability_complete: bool,
    pub complete: bool,
}

impl CompletenessReport {
    pub fn render(&self, sys: &GameSystem) -> String {
        let mut out = String::new();
        out.push_str(&format!("complete: {}\n", if self.complete { "yes" } else { "no" }));
        if !self.reachability_complete {
            out.push_str("  (reachability incomplete: state cap exceeded; report is partial)\n");
        }
        for c in &self.empty_components {
            out.push_str(&format!("  empty component: {c}\n"));
        }
        for (p, d) in &self.unruled_pairs {
            out.push_str(&format!(
                "  no legality rule for ({}, {})\n",
                sys.players[p.0].name, sys.decisions[d.0].name
            ));
        }
        for g in &self.consequence_gaps {
            out.push_str(&format!(
                "  consequence gap: {} at {} ({})\n",
                g.rendered_tuple, g.state, g.detail
            ));
        }
        for g in &self.outcome_gaps {
            let kind = if g.ambiguous { "ambiguous" } else { "undefined" };
            out.push_str(&format!("  outcome {} at terminal state {}\n", kind, g.state));
        }
        for n in &self.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
        out
    }
}

/// One hole in the overcompleteness sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OvercompleteGap {
    EmptyComponent(String),
    /// A non-all-null decision tuple with some state where the consequence
    /// function is undefined.
    Consequence { tuple: Vec<D0>, rendered: String, state: String },
    /// A terminal state with no outcome.
    Outcome { state: String },
    /// A player-decision pair with no legality rule.
    Legality { player: PlayerId, decision: DecisionId },
    /// State space too large to sweep.
    SweepAborted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OvercompleteReport {
    pub overcomplete: bool,
    pub gaps: Vec<OvercompleteGap>,
}

impl OvercompleteReport {
    pub fn render(&self, sys: &GameSystem) -> String {
        let mut out = format!("overcomplete: {}", if self.overcomplete { "yes" } else { "no" });
        if let Some(first) = self.gaps.first() {
            let gap = match first {
                OvercompleteGap::EmptyComponent(c) => format!("empty {c}"),
                OvercompleteGap::Consequence { rendered, .. } => format!("{rendered}"),
                OvercompleteGap::Outcome { state } => format!("no outcome at {state}"),
                OvercompleteGap::Legality { player, decision } => format!(
                    "no legality rule for ({}, {})",
                    sys.players[player.0].name, sys.decisions[decision.0].name
                ),
                OvercompleteGap::SweepAborted => "state space too large to sweep".to_string(),
            };
            out.push_str(&format!(" (gap: {gap})"));
        }
        out
    }
}

/// Checks the overcompleteness conditions: consequences defined on every
/// decision tuple (except all-null) and state, outcomes on every terminal
/// state, legality on every player-decision pair, and all required
/// components nonempty. Such a system plays faithfully from any state.
pub fn check_overcomplete(sys: &GameSystem, state_cap: u64) -> OvercompleteReport {
    let mut gaps = Vec::new();

    for (name, empty) in [
        ("players", sys.players.is_empty()),
        ("tracks", sys.tracks.is_empty()),
        ("initial conditions", sys.initial.is_empty()),
        ("decisions", sys.decisions.is_empty()),
        ("actions", sys.actions.is_empty()),
        ("outcomes", sys.outcomes.is_empty()),
    ] {
        if empty {
            gaps.push(OvercompleteGap::EmptyComponent(name.to_string()));
        }
    }

    for p in 0..sys.players.len() {
        for d in 0..sys.decisions.len() {
            if !sys.legality_defined(PlayerId(p), DecisionId(d)) {
                gaps.push(OvercompleteGap::Legality {
                    player: PlayerId(p),
                    decision: DecisionId(d),
                });
            }
        }
    }

    if sys.state_space_size() > state_cap {
        gaps.push(OvercompleteGap::SweepAborted);
        return OvercompleteReport { overcomplete: false, gaps };
    }

    // Consequence coverage over every tuple (all-null excluded) and state.
    // Tuples iterate with declared decisions before the null slot, so the
    // first gap reported is the earliest in declaration order.
    let mut tuple: Vec<D0> = vec![None; sys.players.len()];
    sweep_tuples(sys, &mut tuple, 0, &mut gaps);

    for s in sys.state_space() {
        if sys.is_terminal(&s) && sys.matching_outcomes(&s).is_empty() && sys.default_outcome.is_none() {
            gaps.push(OvercompleteGap::Outcome { state: sys.render_state(&s) });
        }
    }

    OvercompleteReport { overcomplete: gaps.is_empty(), gaps }
}

fn sweep_tuples(sys: &GameSystem, tuple: &mut Vec<D0>, slot: usize, gaps: &mut Vec<OvercompleteGap>) {
    if slot == tuple.len() {
        if tuple.iter().all(|d| d.is_none()) {
            return;
        }
        for s in sys.state_space() {
            if sys.resolve_consequence(tuple, &s).is_err() {
                gaps.push(OvercompleteGap::Consequence {
                    tuple: tuple.clone(),
                    rendered: sys.render_tuple(tuple),
                    state: sys.render_state(&s),
                });
                return;
            }
        }
        return;
    }
    for d in 0..sys.decisions.len() {
        tuple[slot] = Some(DecisionId(d));
        sweep_tuples(sys, tuple, slot + 1, gaps);
    }
    tuple[slot] = None;
    sweep_tuples(sys, tuple, slot + 1, gaps);
}

/// Legal decision tuples at a state: the product of per-player legal sets,
/// with the null decision filling empty slots. The all-null tuple is the
/// result exactly when the state is terminal.
pub fn legal_tuples(sys: &GameSystem, s: &GameState) -> Vec<Vec<D0>> {
    let per_player: Vec<Vec<D0>> = sys
        .legal_sets(s)
        .into_iter()
        .map(|set| {
            if set.is_empty() {
                vec![None]
            } else {
                set.into_iter().map(Some).collect()
            }
        })
        .collect();
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(per_player.len());
    product(&per_player, 0, &mut current, &mut out);
    out
}

fn product(per: &[Vec<D0>], i: usize, current: &mut Vec<D0>, out: &mut Vec<Vec<D0>>) {
    if i == per.len() {
        out.push(current.clone());
        return;
    }
    for &d in &per[i] {
        current.push(d);
        product(per, i + 1, current, out);
        current.pop();
    }
}
