//! Programmatic construction and validation of game systems.
//!
//! The parser and the random-system generator both funnel through
//! [`validate_system`]; tests use [`SystemBuilder`] to assemble small systems
//! directly.

use std::collections::{BTreeSet, HashSet};

use num_traits::{One, Zero};

use crate::ids::{ActionId, DecisionId, OutcomeId, PlayerId, TrackId};
use crate::model::coords::{Coord, CoordAssignment, CoordSpace};
use crate::model::slice::Slice;
use crate::model::{
    Action, ActionClause, ConsequenceRule, Decision, GameState, GameSystem, InitialSpec,
    LegalityRule, OutcomeRule, Player, Track, TrackValue, ValueCoords, Write, WriteExpr,
};
use crate::rational::{is_valid_weight, Prob};

/// Where in the system a validation defect was found, so front ends can map
/// it back to a source location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DefectSite {
    System,
    Player(usize),
    Track(usize),
    Decision(usize),
    Action(usize),
    ConsequenceRule(usize),
    LegalityRule(usize),
    OutcomeRule(usize),
    Ending,
    Initial,
}

#[derive(Debug, Clone)]
pub struct SystemDefect {
    pub site: DefectSite,
    pub message: String,
}

impl std::fmt::Display for SystemDefect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}: {}", self.site, self.message)
    }
}

fn defect(site: DefectSite, message: impl Into<String>) -> SystemDefect {
    SystemDefect { site, message: message.into() }
}

fn name_ok(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(|c| c == '"' || c.is_control())
}

/// Checks every structural invariant of a system. Empty result means valid.
pub fn validate_system(sys: &GameSystem) -> Vec<SystemDefect> {
    let mut out = Vec::new();

    if sys.players.is_empty() {
        out.push(defect(DefectSite::System, "players section missing or empty"));
    }
    {
        let mut names: Vec<(&str, DefectSite)> = Vec::new();
        for (i, p) in sys.players.iter().enumerate() {
            names.push((&p.name, DefectSite::Player(i)));
        }
        for (i, t) in sys.tracks.iter().enumerate() {
            names.push((&t.name, DefectSite::Track(i)));
            for v in &t.values {
                names.push((&v.name, DefectSite::Track(i)));
            }
        }
        for (i, d) in sys.decisions.iter().enumerate() {
            names.push((&d.name, DefectSite::Decision(i)));
        }
        for (i, a) in sys.actions.iter().enumerate() {
            names.push((&a.name, DefectSite::Action(i)));
        }
        for o in &sys.outcomes {
            names.push((o, DefectSite::System));
        }
        for (n, site) in names {
            if !name_ok(n) {
                out.push(defect(site, format!("name {n:?} is empty or holds a quote/control character")));
            }
        }
    }
    let mut seen = HashSet::new();
    for (i, p) in sys.players.iter().enumerate() {
        if !seen.insert(p.name.as_str()) {
            out.push(defect(DefectSite::Player(i), format!("duplicate player name '{}'", p.name)));
        }
    }

    let mut seen = HashSet::new();
    for (i, t) in sys.tracks.iter().enumerate() {
        if !seen.insert(t.name.as_str()) {
            out.push(defect(DefectSite::Track(i), format!("duplicate track name '{}'", t.name)));
        }
        if t.values.is_empty() {
            out.push(defect(DefectSite::Track(i), format!("track '{}' has no values", t.name)));
        }
        let mut vnames = HashSet::new();
        for v in &t.values {
            if !vnames.insert(v.name.as_str()) {
                out.push(defect(
                    DefectSite::Track(i),
                    format!("duplicate value '{}' on track '{}'", v.name, t.name),
                ));
            }
        }
        for (k, vc) in t.value_coords.iter().enumerate() {
            if vc.coords.len() != t.values.len() {
                out.push(defect(
                    DefectSite::Track(i),
                    format!(
                        "coordinate assignment {} on track '{}' covers {} of {} values",
                        k + 1,
                        t.name,
                        vc.coords.len(),
                        t.values.len()
                    ),
                ));
            }
            for c in &vc.coords {
                if !coord_in_space(c, &vc.space) {
                    out.push(defect(
                        DefectSite::Track(i),
                        format!("coordinate outside its space on track '{}'", t.name),
                    ));
                }
            }
            if let CoordSpace::Mod(m) = vc.space {
                if m == 0 {
                    out.push(defect(DefectSite::Track(i), "modulus must be at least 1"));
                }
            }
            if let CoordSpace::Lattice(d) = vc.space {
                if d == 0 {
                    out.push(defect(DefectSite::Track(i), "lattice dimension must be at least 1"));
                }
            }
        }
        for c in &t.coords {
            if !coord_in_space(&c.coord, &c.space) {
                out.push(defect(
                    DefectSite::Track(i),
                    format!("track coordinate outside its space on '{}'", t.name),
                ));
            }
        }
    }

    let mut seen = HashSet::new();
    for (i, d) in sys.decisions.iter().enumerate() {
        if d.name == "0" {
            out.push(defect(DefectSite::Decision(i), "'0' is reserved for the null decision"));
        }
        if !seen.insert(d.name.as_str()) {
            out.push(defect(DefectSite::Decision(i), format!("duplicate decision name '{}'", d.name)));
        }
    }
    let mut seen = HashSet::new();
    for (i, a) in sys.actions.iter().enumerate() {
        if !seen.insert(a.name.as_str()) {
            out.push(defect(DefectSite::Action(i), format!("duplicate action name '{}'", a.name)));
        }
    }
    let mut seen = HashSet::new();
    for o in &sys.outcomes {
        if !seen.insert(o.as_str()) {
            out.push(defect(DefectSite::System, format!("duplicate outcome name '{o}'")));
        }
    }

    if sys.trivial_consequences {
        if sys.decisions.len() != sys.actions.len() {
            out.push(defect(
                DefectSite::System,
                "decisions ~ actions requires one decision per action",
            ));
        } else {
            for (d, a) in sys.decisions.iter().zip(&sys.actions) {
                if d.name != a.name {
                    out.push(defect(
                        DefectSite::System,
                        format!("decision '{}' does not mirror action '{}'", d.name, a.name),
                    ));
                }
            }
        }
    }

    for (i, a) in sys.actions.iter().enumerate() {
        for clause in &a.clauses {
            check_slice(sys, &clause.guard, DefectSite::Action(i), &mut out);
            let mut written = HashSet::new();
            for w in &clause.writes {
                if w.track.0 >= sys.tracks.len() {
                    out.push(defect(DefectSite::Action(i), "write targets an unknown track"));
                    continue;
                }
                if !written.insert(w.track) {
                    out.push(defect(
                        DefectSite::Action(i),
                        format!(
                            "action '{}' writes track '{}' twice in one clause",
                            a.name, sys.tracks[w.track.0].name
                        ),
                    ));
                }
                match &w.expr {
                    WriteExpr::Value(v) => {
                        if v.0 >= sys.tracks[w.track.0].values.len() {
                            out.push(defect(
                                DefectSite::Action(i),
                                format!(
                                    "action '{}' writes an undeclared value to track '{}'",
                                    a.name, sys.tracks[w.track.0].name
                                ),
                            ));
                        }
                    }
                    WriteExpr::Coord { index, expr } => {
                        check_scalar_coord(sys, w.track, *index, DefectSite::Action(i), &mut out);
                        let mut tracks = Vec::new();
                        expr.tracks(&mut tracks);
                        for t in tracks {
                            check_scalar_coord(sys, t, *index, DefectSite::Action(i), &mut out);
                        }
                    }
                }
            }
        }
    }

    for (i, rule) in sys.consequence_rules.iter().enumerate() {
        if rule.pattern.len() != sys.players.len() {
            out.push(defect(
                DefectSite::ConsequenceRule(i),
                format!(
                    "pattern has {} slots for {} players",
                    rule.pattern.len(),
                    sys.players.len()
                ),
            ));
        }
        check_slice(sys, &rule.guard, DefectSite::ConsequenceRule(i), &mut out);
        if rule.consequences.is_empty() {
            out.push(defect(DefectSite::ConsequenceRule(i), "consequence set is empty"));
        }
        let mut total = Prob::zero();
        for c in &rule.consequences {
            if !is_valid_weight(&c.weight) {
                out.push(defect(
                    DefectSite::ConsequenceRule(i),
                    "consequence probability outside (0, 1]",
                ));
            }
            total += &c.weight;
            for a in &c.actions {
                if a.0 >= sys.actions.len() {
                    out.push(defect(DefectSite::ConsequenceRule(i), "unknown action in consequence"));
                }
            }
        }
        if !rule.consequences.is_empty() && !total.is_one() {
            out.push(defect(
                DefectSite::ConsequenceRule(i),
                format!("consequence probabilities sum to {total}, not 1"),
            ));
        }
        for pat in &rule.pattern {
            if let crate::model::DecisionPattern::Is(d) = pat {
                if d.0 >= sys.decisions.len() {
                    out.push(defect(DefectSite::ConsequenceRule(i), "unknown decision in pattern"));
                }
            }
        }
    }

    for (i, rule) in sys.legality_rules.iter().enumerate() {
        check_slice(sys, &rule.slice, DefectSite::LegalityRule(i), &mut out);
        if let crate::model::PlayerPattern::Is(p) = &rule.player {
            if p.0 >= sys.players.len() {
                out.push(defect(DefectSite::LegalityRule(i), "unknown player in legality rule"));
            }
        }
        if let crate::model::DecisionSelector::Is(d) = &rule.decision {
            if d.0 >= sys.decisions.len() {
                out.push(defect(DefectSite::LegalityRule(i), "unknown decision in legality rule"));
            }
        }
    }

    check_slice(sys, &sys.ending, DefectSite::Ending, &mut out);

    for (i, rule) in sys.outcome_rules.iter().enumerate() {
        check_slice(sys, &rule.slice, DefectSite::OutcomeRule(i), &mut out);
        if rule.outcome.0 >= sys.outcomes.len() {
            out.push(defect(DefectSite::OutcomeRule(i), "unknown outcome"));
        }
    }
    if let Some(d) = sys.default_outcome {
        if d.0 >= sys.outcomes.len() {
            out.push(defect(DefectSite::System, "unknown default outcome"));
        }
    }

    if sys.initial.is_empty() {
        out.push(defect(DefectSite::Initial, "initial conditions are empty"));
    }
    if let InitialSpec::Slice(slice) = &sys.initial_spec {
        check_slice(sys, slice, DefectSite::Initial, &mut out);
    }
    for s in &sys.initial {
        if s.len() != sys.tracks.len() {
            out.push(defect(DefectSite::Initial, "initial state has wrong arity"));
        } else {
            for (t, v) in s.values().iter().enumerate() {
                if v.0 >= sys.tracks[t].values.len() {
                    out.push(defect(DefectSite::Initial, "initial state holds an undeclared value"));
                }
            }
        }
    }

    out
}

fn coord_in_space(c: &Coord, space: &CoordSpace) -> bool {
    match (c, space) {
        (Coord::Int(_), CoordSpace::Int) => true,
        (Coord::Mod(r), CoordSpace::Mod(m)) => r < m,
        (Coord::Lattice(v), CoordSpace::Lattice(d)) => v.len() == *d,
        (Coord::Node(n), CoordSpace::Graph(g)) => *n < g.nodes.len(),
        _ => false,
    }
}

fn check_scalar_coord(
    sys: &GameSystem,
    track: TrackId,
    index: usize,
    site: DefectSite,
    out: &mut Vec<SystemDefect>,
) {
    if track.0 >= sys.tracks.len() {
        out.push(defect(site, "unknown track in coordinate expression"));
        return;
    }
    let t = &sys.tracks[track.0];
    match t.value_coords.get(index) {
        None => out.push(defect(
            site,
            format!("track '{}' has no coordinate assignment {}", t.name, index + 1),
        )),
        Some(vc) => match vc.space {
            CoordSpace::Int | CoordSpace::Mod(_) => {}
            _ => out.push(defect(
                site,
                format!(
                    "coordinate {} of track '{}' is not a scalar space",
                    index + 1,
                    t.name
                ),
            )),
        },
    }
}

fn check_slice(sys: &GameSystem, slice: &Slice, site: DefectSite, out: &mut Vec<SystemDefect>) {
    match slice {
        Slice::All | Slice::Empty => {}
        Slice::Is(t, v) => {
            if t.0 >= sys.tracks.len() {
                out.push(defect(site, "slice references an unknown track"));
            } else if v.0 >= sys.tracks[t.0].values.len() {
                out.push(defect(
                    site,
                    format!("slice references an undeclared value on track '{}'", sys.tracks[t.0].name),
                ));
            }
        }
        Slice::InSet(t, vs) => {
            if t.0 >= sys.tracks.len() {
                out.push(defect(site.clone(), "slice references an unknown track"));
            } else {
                for v in vs {
                    if v.0 >= sys.tracks[t.0].values.len() {
                        out.push(defect(site.clone(), "slice value set holds an undeclared value"));
                    }
                }
            }
        }
        Slice::Cmp(atom) => {
            let mut tracks = Vec::new();
            atom.lhs.tracks(&mut tracks);
            atom.rhs.tracks(&mut tracks);
            let mut modulus: Option<Option<u64>> = None;
            for t in tracks {
                check_scalar_coord(sys, t, atom.coord_index, site.clone(), out);
                if t.0 < sys.tracks.len() {
                    if let Some(vc) = sys.tracks[t.0].value_coords.get(atom.coord_index) {
                        let m = match vc.space {
                            CoordSpace::Mod(m) => Some(m),
                            _ => None,
                        };
                        match modulus {
                            None => modulus = Some(m),
                            Some(prev) if prev != m => out.push(defect(
                                site.clone(),
                                "comparison mixes tracks from different coordinate spaces",
                            )),
                            _ => {}
                        }
                    }
                }
            }
            if let Some(m) = modulus {
                if m != atom.modulus {
                    out.push(defect(
                        site.clone(),
                        "comparison modulus does not match the tracks' coordinate space",
                    ));
                }
            }
            if atom.op.is_ordering() && atom.modulus.is_some() {
                out.push(defect(site, "order comparisons are not defined in modular spaces"));
            }
        }
        Slice::Not(inner) => check_slice(sys, inner, site, out),
        Slice::And(parts) | Slice::Or(parts) => {
            for p in parts {
                check_slice(sys, p, site.clone(), out);
            }
        }
    }
}

/// Incremental construction of a [`GameSystem`] from code.
pub struct SystemBuilder {
    sys: GameSystem,
    initial_states: Vec<GameState>,
    initial_slice: Option<Slice>,
    enumeration_cap: u64,
}

impl SystemBuilder {
    pub fn new(name: &str) -> Self {
        SystemBuilder {
            sys: GameSystem {
                name: name.to_string(),
                players: Vec::new(),
                tracks: Vec::new(),
                initial_spec: InitialSpec::States(Vec::new()),
                initial: Vec::new(),
                decisions: Vec::new(),
                actions: Vec::new(),
                trivial_consequences: false,
                consequence_rules: Vec::new(),
                legality_rules: Vec::new(),
                ending: Slice::Empty,
                outcomes: Vec::new(),
                outcome_rules: Vec::new(),
                default_outcome: None,
                compiled: Default::default(),
            },
            initial_states: Vec::new(),
            initial_slice: None,
            enumeration_cap: 1 << 22,
        }
    }

    pub fn player(&mut self, name: &str) -> PlayerId {
        self.sys.players.push(Player { name: name.to_string(), tags: BTreeSet::new() });
        PlayerId(self.sys.players.len() - 1)
    }

    pub fn track<'a>(&mut self, name: &str, values: impl IntoIterator<Item = &'a str>) -> TrackId {
        self.sys.tracks.push(Track {
            name: name.to_string(),
            tags: BTreeSet::new(),
            values: values
                .into_iter()
                .map(|v| TrackValue { name: v.to_string(), tags: BTreeSet::new() })
                .collect(),
            coords: Vec::new(),
            value_coords: Vec::new(),
        });
        TrackId(self.sys.tracks.len() - 1)
    }

    pub fn track_full(&mut self, track: Track) -> TrackId {
        self.sys.tracks.push(track);
        TrackId(self.sys.tracks.len() - 1)
    }

    pub fn tag_track(&mut self, t: TrackId, tag: &str) {
        self.sys.tracks[t.0].tags.insert(tag.to_string());
    }

    pub fn track_coord(&mut self, t: TrackId, c: CoordAssignment) {
        self.sys.tracks[t.0].coords.push(c);
    }

    pub fn value_coords(&mut self, t: TrackId, vc: ValueCoords) {
        self.sys.tracks[t.0].value_coords.push(vc);
    }

    /// Integer coordinates equal to each value's numeric name, the implicit
    /// assignment of interval-declared values.
    pub fn int_value_coords(&mut self, t: TrackId) {
        let coords = self.sys.tracks[t.0]
            .values
            .iter()
            .map(|v| Coord::Int(v.name.parse().expect("numeric value name")))
            .collect();
        self.value_coords(t, ValueCoords { space: CoordSpace::Int, coords });
    }

    pub fn decision(&mut self, name: &str) -> DecisionId {
        self.sys.decisions.push(Decision {
            name: name.to_string(),
            tags: BTreeSet::new(),
            coords: Vec::new(),
        });
        DecisionId(self.sys.decisions.len() - 1)
    }

    pub fn decision_coord(&mut self, d: DecisionId, c: CoordAssignment) {
        self.sys.decisions[d.0].coords.push(c);
    }

    pub fn action(&mut self, name: &str, clauses: Vec<ActionClause>) -> ActionId {
        self.sys.actions.push(Action {
            name: name.to_string(),
            tags: BTreeSet::new(),
            clauses,
        });
        ActionId(self.sys.actions.len() - 1)
    }

    /// Single-clause action: guard plus literal writes.
    pub fn simple_action(&mut self, name: &str, guard: Slice, writes: Vec<(TrackId, crate::ids::ValueId)>) -> ActionId {
        self.action(
            name,
            vec![ActionClause {
                guard,
                writes: writes
                    .into_iter()
                    .map(|(track, v)| Write { track, expr: WriteExpr::Value(v) })
                    .collect(),
            }],
        )
    }

    /// Mirrors every action as a decision and enables the trivial
    /// consequence function.
    pub fn decisions_from_actions(&mut self) {
        self.sys.trivial_consequences = true;
        self.sys.decisions = self
            .sys
            .actions
            .iter()
            .map(|a| Decision { name: a.name.clone(), tags: a.tags.clone(), coords: Vec::new() })
            .collect();
    }

    pub fn consequence_rule(&mut self, rule: ConsequenceRule) {
        self.sys.consequence_rules.push(rule);
    }

    pub fn legality_rule(&mut self, rule: LegalityRule) {
        self.sys.legality_rules.push(rule);
    }

    pub fn legal(&mut self, player: PlayerId, decision: DecisionId, slice: Slice) {
        self.legality_rule(LegalityRule {
            player: crate::model::PlayerPattern::Is(player),
            decision: crate::model::DecisionSelector::Is(decision),
            slice,
            otherwise: false,
        });
    }

    pub fn ending(&mut self, slice: Slice) {
        self.sys.ending = slice;
    }

    pub fn outcome(&mut self, name: &str) -> OutcomeId {
        self.sys.outcomes.push(name.to_string());
        OutcomeId(self.sys.outcomes.len() - 1)
    }

    pub fn outcome_rule(&mut self, slice: Slice, outcome: OutcomeId) {
        self.sys.outcome_rules.push(OutcomeRule { slice, outcome });
    }

    pub fn default_outcome(&mut self, outcome: OutcomeId) {
        self.sys.default_outcome = Some(outcome);
    }

    pub fn initial_state(&mut self, s: GameState) {
        self.initial_states.push(s);
    }

    pub fn initial_slice(&mut self, slice: Slice) {
        self.initial_slice = Some(slice);
    }

    pub fn build(mut self) -> Result<GameSystem, Vec<SystemDefect>> {
        match self.initial_slice.take() {
            Some(slice) => {
                // The slice must be well-formed before it can be evaluated.
                let mut pre = Vec::new();
                check_slice(&self.sys, &slice, DefectSite::Initial, &mut pre);
                if !pre.is_empty() {
                    return Err(pre);
                }
                self.sys.initial = self
                    .sys
                    .states_in_slice(&slice, self.enumeration_cap)
                    .ok_or_else(|| {
                        vec![defect(
                            DefectSite::Initial,
                            "state space too large to enumerate initial conditions",
                        )]
                    })?;
                self.sys.initial_spec = InitialSpec::Slice(slice);
            }
            None => {
                self.initial_states.sort();
                self.initial_states.dedup();
                self.sys.initial = self.initial_states.clone();
                self.sys.initial_spec = InitialSpec::States(self.initial_states);
            }
        }
        let defects = validate_system(&self.sys);
        if defects.is_empty() {
            self.sys.finalize();
            Ok(self.sys)
        } else {
            Err(defects)
        }
    }
}
