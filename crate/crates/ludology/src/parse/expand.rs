//! Comprehension expansion and name resolution: raw declarations to a
//! validated system.
//!
//! Expansion walks declarations in order, so every name must be declared
//! before use (binder sets in particular draw from what has been declared so
//! far). Rule bodies — legality, consequences, ending, outcomes, initial
//! conditions — resolve after all entities exist, which also lets
//! `decisions ~ actions` synthesize the decision set last.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use crate::ids::{ActionId, TrackId, ValueId};
use crate::ludeme::{ArgKind, Catalog, LudemeArg, LudemeValue};
use crate::model::builder::{validate_system, DefectSite};
use crate::model::{
    Action, ActionClause, CmpAtom, CmpOp, Consequence, ConsequenceRule, Coord, CoordAssignment,
    CoordExpr, CoordSpace, Decision, DecisionPattern, DecisionSelector, GameSystem, InitialSpec,
    LegalityRule, OutcomeRule, Player, PlayerPattern, Slice, Track, TrackValue, ValueCoords,
    Write, WriteExpr,
};
use crate::parse::ast::*;
use crate::parse::{Diagnostic, Pos};
use crate::rational::Prob;

#[derive(Debug, Clone)]
enum Binding {
    Int(i64),
    Name(String),
}

impl Binding {
    fn render(&self) -> String {
        match self {
            Binding::Int(v) => v.to_string(),
            Binding::Name(s) => s.clone(),
        }
    }
}

type Env = BTreeMap<String, Binding>;

/// A rule declaration whose names are already concrete, pending resolution.
#[derive(Debug)]
enum Pending {
    Consequence {
        pattern: Vec<RawDecisionPat>,
        guard: Option<RawSlice>,
        branches: Vec<(Prob, Vec<RawActionRef>)>,
        pos: Pos,
    },
    Legal { player: RawPlayerPat, decision: RawDecisionPat, slice: RawSlice, otherwise: bool, pos: Pos },
    Ending(RawSlice, Pos),
    Omega { slice: Option<RawSlice>, outcome: Name, pos: Pos },
    Init(RawSlice, Pos),
}

/// An action shell whose clauses await resolution.
struct DraftAction {
    action: Action,
    clauses: Vec<RawClause>,
    pos: Pos,
}

struct Expander<'a> {
    catalog: &'a Catalog,
    diags: Vec<Diagnostic>,
    name: String,
    players: Vec<Player>,
    player_pos: Vec<Pos>,
    tracks: Vec<Track>,
    track_pos: Vec<Pos>,
    decisions: Vec<Decision>,
    decision_pos: Vec<Pos>,
    trivial: bool,
    actions: Vec<DraftAction>,
    outcomes: Vec<String>,
    outcome_pos: Vec<Pos>,
    pending: Vec<Pending>,
    saw_players_section: bool,
}

pub fn expand(decls: &[Spanned], catalog: &Catalog) -> (Option<GameSystem>, Vec<Diagnostic>) {
    let mut ex = Expander {
        catalog,
        diags: Vec::new(),
        name: "game".to_string(),
        players: Vec::new(),
        player_pos: Vec::new(),
        tracks: Vec::new(),
        track_pos: Vec::new(),
        decisions: Vec::new(),
        decision_pos: Vec::new(),
        trivial: false,
        actions: Vec::new(),
        outcomes: Vec::new(),
        outcome_pos: Vec::new(),
        pending: Vec::new(),
        saw_players_section: false,
    };
    let env = Env::new();
    for d in decls {
        ex.process(d, &env);
    }
    if !ex.saw_players_section {
        ex.error(Pos { line: 1, col: 1 }, "players section missing");
    }
    let sys = ex.finish();
    (sys, ex.diags)
}

impl<'a> Expander<'a> {
    fn error(&mut self, pos: Pos, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(pos, msg));
    }

    fn error_sym(&mut self, pos: Pos, msg: impl Into<String>, sym: &str) {
        self.diags.push(Diagnostic::error(pos, msg).with_symbol(sym));
    }

    // ------------------------------------------------------------------
    // Template substitution
    // ------------------------------------------------------------------

    fn subst_name(&mut self, name: &Name, env: &Env) -> Option<String> {
        let mut out = String::new();
        for frag in &name.frags {
            match frag {
                Frag::Text(t) => out.push_str(t),
                Frag::Var(v) => match env.get(v) {
                    Some(b) => out.push_str(&b.render()),
                    None => {
                        self.error_sym(name.pos, format!("unbound variable '{{{v}}}'"), v);
                        return None;
                    }
                },
            }
        }
        Some(out)
    }

    fn subst_term(&mut self, term: &Term, env: &Env) -> Option<Term> {
        Some(match term {
            Term::Int(v) => Term::Int(*v),
            Term::ValueOf(n) => Term::ValueOf(Name::plain(&self.subst_name(n, env)?, n.pos)),
            Term::TrackCoordOf(n) => Term::TrackCoordOf(Name::plain(&self.subst_name(n, env)?, n.pos)),
            Term::Sym(n) => {
                let s = self.subst_name(n, env)?;
                match s.parse::<i64>() {
                    Ok(v) => Term::Int(v),
                    Err(_) => Term::Sym(Name::plain(&s, n.pos)),
                }
            }
            Term::Add(a, b) => Term::Add(
                Box::new(self.subst_term(a, env)?),
                Box::new(self.subst_term(b, env)?),
            ),
            Term::Sub(a, b) => Term::Sub(
                Box::new(self.subst_term(a, env)?),
                Box::new(self.subst_term(b, env)?),
            ),
            Term::Neg(a) => Term::Neg(Box::new(self.subst_term(a, env)?)),
        })
    }

    fn subst_slice(&mut self, slice: &RawSlice, env: &Env) -> Option<RawSlice> {
        Some(match slice {
            RawSlice::All => RawSlice::All,
            RawSlice::Empty => RawSlice::Empty,
            RawSlice::Is { value, track } => RawSlice::Is {
                value: Name::plain(&self.subst_name(value, env)?, value.pos),
                track: Name::plain(&self.subst_name(track, env)?, track.pos),
            },
            RawSlice::TagProduct { value, tags } => RawSlice::TagProduct {
                value: Name::plain(&self.subst_name(value, env)?, value.pos),
                tags: self.subst_names(tags, env)?,
            },
            RawSlice::Bracket(b, pos) => {
                let b = match b {
                    RawBracket::Cmp { lhs, op, rhs, coord_index } => RawBracket::Cmp {
                        lhs: self.subst_term(lhs, env)?,
                        op: *op,
                        rhs: self.subst_term(rhs, env)?,
                        coord_index: *coord_index,
                    },
                    RawBracket::Membership { subject, tags } => RawBracket::Membership {
                        subject: self.subst_term(subject, env)?,
                        tags: self.subst_names(tags, env)?,
                    },
                    RawBracket::MembershipValues { subject, values } => {
                        RawBracket::MembershipValues {
                            subject: self.subst_term(subject, env)?,
                            values: self.subst_names(values, env)?,
                        }
                    }
                };
                RawSlice::Bracket(b, *pos)
            }
            RawSlice::Call(call) => RawSlice::Call(self.subst_call(call, env)?),
            RawSlice::Not(inner) => RawSlice::Not(Box::new(self.subst_slice(inner, env)?)),
            RawSlice::And(parts) => RawSlice::And(
                parts.iter().map(|p| self.subst_slice(p, env)).collect::<Option<Vec<_>>>()?,
            ),
            RawSlice::Or(parts) => RawSlice::Or(
                parts.iter().map(|p| self.subst_slice(p, env)).collect::<Option<Vec<_>>>()?,
            ),
        })
    }

    fn subst_names(&mut self, names: &[Name], env: &Env) -> Option<Vec<Name>> {
        names
            .iter()
            .map(|n| Some(Name::plain(&self.subst_name(n, env)?, n.pos)))
            .collect()
    }

    fn subst_call(&mut self, call: &RawCall, env: &Env) -> Option<RawCall> {
        let args = call
            .args
            .iter()
            .map(|a| {
                Some(match a {
                    RawArg::TagSet(tags) => RawArg::TagSet(self.subst_names(tags, env)?),
                    RawArg::Name(n) => {
                        let s = self.subst_name(n, env)?;
                        match s.parse::<i64>() {
                            Ok(v) => RawArg::Int(v),
                            Err(_) => RawArg::Name(Name::plain(&s, n.pos)),
                        }
                    }
                    RawArg::Int(v) => RawArg::Int(*v),
                })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(RawCall {
            name: Name::plain(&self.subst_name(&call.name, env)?, call.name.pos),
            args,
            pos: call.pos,
        })
    }

    // ------------------------------------------------------------------
    // Declaration processing
    // ------------------------------------------------------------------

    fn process(&mut self, spanned: &Spanned, env: &Env) {
        let pos = spanned.pos;
        match &spanned.decl {
            Decl::Game(name) => {
                if let Some(n) = self.subst_name(name, env) {
                    self.name = n;
                }
            }
            Decl::Players(items) => {
                self.saw_players_section = true;
                for (name, tags) in items {
                    let (Some(n), Some(tags)) =
                        (self.subst_name(name, env), self.subst_tag_strings(tags, env))
                    else {
                        continue;
                    };
                    self.players.push(Player { name: n, tags });
                    self.player_pos.push(pos);
                }
            }
            Decl::Track { name, tags, coord, values, coord_specs } => {
                self.track_decl(name, tags, coord, values, coord_specs, pos, env);
            }
            Decl::Init(slice) => {
                if let Some(s) = self.subst_slice(slice, env) {
                    if self.pending.iter().any(|p| matches!(p, Pending::Init(..))) {
                        self.error(pos, "duplicate init declaration");
                    } else {
                        self.pending.push(Pending::Init(s, pos));
                    }
                }
            }
            Decl::DecisionsFromActions => {
                if !self.decisions.is_empty() {
                    self.error(pos, "decisions ~ actions conflicts with explicit decisions");
                }
                self.trivial = true;
            }
            Decl::Decisions { items, coord_specs } => {
                if self.trivial {
                    self.error(pos, "explicit decisions conflict with decisions ~ actions");
                }
                let start = self.decisions.len();
                for (name, tags) in items {
                    let (Some(n), Some(tags)) =
                        (self.subst_name(name, env), self.subst_tag_strings(tags, env))
                    else {
                        continue;
                    };
                    self.decisions.push(Decision { name: n, tags, coords: Vec::new() });
                    self.decision_pos.push(pos);
                }
                let count = self.decisions.len() - start;
                for spec in coord_specs {
                    match self.coord_list(spec, count, pos) {
                        Some(coords) => {
                            let space = spec_space(spec);
                            for (i, c) in coords.into_iter().enumerate() {
                                self.decisions[start + i]
                                    .coords
                                    .push(CoordAssignment { space: space.clone(), coord: c });
                            }
                        }
                        None => continue,
                    }
                }
            }
            Decl::Action { name, tags, clauses } => {
                let (Some(n), Some(tags)) =
                    (self.subst_name(name, env), self.subst_tag_strings(tags, env))
                else {
                    return;
                };
                let clauses = clauses
                    .iter()
                    .filter_map(|c| self.subst_clause(c, env))
                    .collect::<Vec<_>>();
                self.actions.push(DraftAction {
                    action: Action { name: n, tags, clauses: Vec::new() },
                    clauses,
                    pos,
                });
            }
            Decl::Consequence { pattern, guard, branches } => {
                let pattern = pattern
                    .iter()
                    .map(|p| self.subst_dpat(p, env))
                    .collect::<Option<Vec<_>>>();
                let guard = match guard {
                    Some(g) => match self.subst_slice(g, env) {
                        Some(g) => Some(g),
                        None => return,
                    },
                    None => None,
                };
                let branches = branches
                    .iter()
                    .map(|(p, refs)| {
                        let refs = refs
                            .iter()
                            .map(|r| self.subst_action_ref(r, env))
                            .collect::<Option<Vec<_>>>()?;
                        Some((p.clone(), refs))
                    })
                    .collect::<Option<Vec<_>>>();
                if let (Some(pattern), Some(branches)) = (pattern, branches) {
                    self.pending.push(Pending::Consequence { pattern, guard, branches, pos });
                }
            }
            Decl::Legal { player, decision, slice, otherwise } => {
                let player = match player {
                    RawPlayerPat::Any => RawPlayerPat::Any,
                    RawPlayerPat::Named(n) => match self.subst_name(n, env) {
                        Some(s) => RawPlayerPat::Named(Name::plain(&s, n.pos)),
                        None => return,
                    },
                };
                let (Some(decision), Some(slice)) =
                    (self.subst_dpat(decision, env), self.subst_slice(slice, env))
                else {
                    return;
                };
                self.pending.push(Pending::Legal { player, decision, slice, otherwise: *otherwise, pos });
            }
            Decl::Ending(slice) => {
                if let Some(s) = self.subst_slice(slice, env) {
                    self.pending.push(Pending::Ending(s, pos));
                }
            }
            Decl::Outcomes(items) => {
                for (name, _tags) in items {
                    if let Some(n) = self.subst_name(name, env) {
                        self.outcomes.push(n);
                        self.outcome_pos.push(pos);
                    }
                }
            }
            Decl::Omega { slice, outcome } => {
                let slice = match slice {
                    Some(s) => match self.subst_slice(s, env) {
                        Some(s) => Some(s),
                        None => return,
                    },
                    None => None,
                };
                if let Some(o) = self.subst_name(outcome, env) {
                    self.pending.push(Pending::Omega {
                        slice,
                        outcome: Name::plain(&o, outcome.pos),
                        pos,
                    });
                }
            }
            Decl::Ludemes(names) => {
                for n in names {
                    if let Some(s) = self.subst_name(n, env) {
                        if self.catalog.lookup(&s).is_err() {
                            self.error_sym(n.pos, format!("unknown ludeme '{s}'"), &s);
                        }
                    }
                }
            }
            Decl::Forall { binders, conds, body } => {
                self.expand_forall(binders, conds, body, env.clone(), 0, pos);
            }
        }
    }

    fn subst_tag_strings(&mut self, tags: &[Name], env: &Env) -> Option<BTreeSet<String>> {
        tags.iter().map(|t| self.subst_name(t, env)).collect()
    }

    fn subst_dpat(&mut self, pat: &RawDecisionPat, env: &Env) -> Option<RawDecisionPat> {
        Some(match pat {
            RawDecisionPat::Any => RawDecisionPat::Any,
            RawDecisionPat::Null => RawDecisionPat::Null,
            RawDecisionPat::Named(n) => {
                RawDecisionPat::Named(Name::plain(&self.subst_name(n, env)?, n.pos))
            }
            RawDecisionPat::Tagged(tags) => RawDecisionPat::Tagged(self.subst_names(tags, env)?),
        })
    }

    fn subst_action_ref(&mut self, r: &RawActionRef, env: &Env) -> Option<RawActionRef> {
        Some(match r {
            RawActionRef::Named(n) => RawActionRef::Named(Name::plain(&self.subst_name(n, env)?, n.pos)),
            RawActionRef::Call(c) => RawActionRef::Call(self.subst_call(c, env)?),
        })
    }

    fn subst_clause(&mut self, c: &RawClause, env: &Env) -> Option<RawClause> {
        let guard = self.subst_slice(&c.guard, env)?;
        let writes = c
            .writes
            .iter()
            .map(|w| {
                let track = Name::plain(&self.subst_name(&w.track, env)?, w.track.pos);
                let rhs = match &w.rhs {
                    RawWriteRhs::Value(n) => {
                        RawWriteRhs::Value(Name::plain(&self.subst_name(n, env)?, n.pos))
                    }
                    RawWriteRhs::Shift { delta, coord_index } => {
                        RawWriteRhs::Shift { delta: *delta, coord_index: *coord_index }
                    }
                    RawWriteRhs::Expr { term, coord_index } => RawWriteRhs::Expr {
                        term: self.subst_term(term, env)?,
                        coord_index: *coord_index,
                    },
                };
                Some(RawWrite { track, rhs })
            })
            .collect::<Option<Vec<_>>>()?;
        Some(RawClause { guard, writes })
    }

    // ------------------------------------------------------------------
    // forall
    // ------------------------------------------------------------------

    fn expand_forall(
        &mut self,
        binders: &[RawBinder],
        conds: &[RawCond],
        body: &Spanned,
        env: Env,
        depth: usize,
        pos: Pos,
    ) {
        if depth == binders.len() {
            if self.conds_hold(conds, &env, pos) {
                self.process(body, &env);
            }
            return;
        }
        let binder = &binders[depth];
        let bindings = match self.binder_values(&binder.set, &env, binder.pos) {
            Some(b) => b,
            None => return,
        };
        for b in bindings {
            let mut next = env.clone();
            next.insert(binder.var.clone(), b);
            self.expand_forall(binders, conds, body, next, depth + 1, pos);
        }
    }

    fn binder_values(&mut self, set: &RawSetExpr, env: &Env, pos: Pos) -> Option<Vec<Binding>> {
        Some(match set {
            RawSetExpr::Range(a, b) => (*a..=*b).map(Binding::Int).collect(),
            RawSetExpr::Names(names) => names
                .iter()
                .map(|n| {
                    let s = self.subst_name(n, env)?;
                    Some(match s.parse::<i64>() {
                        Ok(v) => Binding::Int(v),
                        Err(_) => Binding::Name(s),
                    })
                })
                .collect::<Option<Vec<_>>>()?,
            RawSetExpr::TrackTags(tags) => {
                let tags = self.subst_tag_strings(tags, env)?;
                let tracks: Vec<Binding> = self
                    .tracks
                    .iter()
                    .filter(|t| tags.iter().all(|tag| t.tags.contains(tag)))
                    .map(|t| Binding::Name(t.name.clone()))
                    .collect();
                if tracks.is_empty() {
                    self.error(pos, format!("no track carries tags ({})", join_tags(&tags)));
                }
                tracks
            }
            RawSetExpr::Players => {
                self.players.iter().map(|p| Binding::Name(p.name.clone())).collect()
            }
            RawSetExpr::Decisions => {
                if self.decisions.is_empty() {
                    self.error(pos, "no decisions declared before this comprehension");
                }
                self.decisions.iter().map(|d| Binding::Name(d.name.clone())).collect()
            }
        })
    }

    fn conds_hold(&mut self, conds: &[RawCond], env: &Env, pos: Pos) -> bool {
        conds.iter().all(|c| {
            let l = self.cond_value(&c.lhs, env, pos);
            let r = self.cond_value(&c.rhs, env, pos);
            match (l, r) {
                (Some(l), Some(r)) => (l == r) != c.negated,
                _ => false,
            }
        })
    }

    fn cond_value(&mut self, term: &Term, env: &Env, pos: Pos) -> Option<String> {
        match self.subst_term(term, env)? {
            Term::Int(v) => Some(v.to_string()),
            Term::Sym(n) => n.literal().map(|s| s.to_string()),
            _ => {
                self.error(pos, "where-conditions compare names and integers only");
                None
            }
        }
    }

    // ------------------------------------------------------------------
    // Tracks
    // ------------------------------------------------------------------

    #[allow(clippy::too_many_arguments)]
    fn track_decl(
        &mut self,
        name: &Name,
        tags: &[Name],
        coord: &Option<RawTrackCoord>,
        values: &[RawValueItem],
        coord_specs: &[RawCoordSpec],
        pos: Pos,
        env: &Env,
    ) {
        let Some(track_name) = self.subst_name(name, env) else { return };
        let Some(tags) = self.subst_tag_strings(tags, env) else { return };

        let mut vals: Vec<TrackValue> = Vec::new();
        let mut all_intervals = !values.is_empty();
        for item in values {
            match item {
                RawValueItem::Named { name, tags } => {
                    all_intervals = false;
                    let (Some(n), Some(tags)) =
                        (self.subst_name(name, env), self.subst_tag_strings(tags, env))
                    else {
                        continue;
                    };
                    vals.push(TrackValue { name: n, tags });
                }
                RawValueItem::Interval(a, b) => {
                    for v in *a..=*b {
                        vals.push(TrackValue { name: v.to_string(), tags: BTreeSet::new() });
                    }
                }
            }
        }

        let mut value_coords = Vec::new();
        if coord_specs.is_empty() {
            // Interval-declared values refer to integers by default.
            if all_intervals {
                value_coords.push(ValueCoords {
                    space: CoordSpace::Int,
                    coords: vals.iter().map(|v| Coord::Int(v.name.parse().unwrap())).collect(),
                });
            }
        } else {
            for spec in coord_specs {
                if let Some(coords) = self.coord_list(spec, vals.len(), pos) {
                    value_coords.push(ValueCoords { space: spec_space(spec), coords });
                }
            }
        }

        let mut coords = Vec::new();
        match coord {
            Some(RawTrackCoord::Int(term)) => {
                if let Some(k) = self.const_term(term, env, pos) {
                    coords.push(CoordAssignment::int(k));
                }
            }
            Some(RawTrackCoord::Lattice(terms)) => {
                let point: Option<Vec<i64>> =
                    terms.iter().map(|t| self.const_term(t, env, pos)).collect();
                if let Some(p) = point {
                    coords.push(CoordAssignment::lattice(p));
                }
            }
            None => {
                // Integer-named tracks get an integer coordinate implicitly.
                if let Ok(k) = track_name.parse::<i64>() {
                    coords.push(CoordAssignment::int(k));
                }
            }
        }

        self.tracks.push(Track { name: track_name, tags, values: vals, coords, value_coords });
        self.track_pos.push(pos);
    }

    fn const_term(&mut self, term: &Term, env: &Env, pos: Pos) -> Option<i64> {
        match self.subst_term(term, env)? {
            Term::Int(v) => Some(v),
            Term::Neg(inner) => match *inner {
                Term::Int(v) => Some(-v),
                _ => {
                    self.error(pos, "track coordinates must be integer constants");
                    None
                }
            },
            _ => {
                self.error(pos, "track coordinates must be integer constants");
                None
            }
        }
    }

    fn coord_list(&mut self, spec: &RawCoordSpec, count: usize, pos: Pos) -> Option<Vec<Coord>> {
        let coords: Vec<Coord> = match spec {
            RawCoordSpec::Mod(m) => {
                if count as u64 != *m {
                    self.error(pos, format!("mod {m} assigns {m} coordinates to {count} elements"));
                    return None;
                }
                (0..count).map(|i| Coord::Mod(i as u64)).collect()
            }
            RawCoordSpec::Interval(a, b) => {
                let n = if b >= a { (b - a + 1) as usize } else { 0 };
                if n != count {
                    self.error(pos, format!("[{a},{b}] assigns {n} coordinates to {count} elements"));
                    return None;
                }
                (*a..=*b).map(Coord::Int).collect()
            }
            RawCoordSpec::Ints(list) => {
                if list.len() != count {
                    self.error(
                        pos,
                        format!("ints assigns {} coordinates to {count} elements", list.len()),
                    );
                    return None;
                }
                list.iter().map(|&k| Coord::Int(k)).collect()
            }
            RawCoordSpec::Lattice(points) => {
                if points.len() != count {
                    self.error(
                        pos,
                        format!("lats assigns {} coordinates to {count} elements", points.len()),
                    );
                    return None;
                }
                let d = points.first().map(|p| p.len()).unwrap_or(1);
                if points.iter().any(|p| p.len() != d) {
                    self.error(pos, "lattice points have mixed dimensions");
                    return None;
                }
                points.iter().map(|p| Coord::Lattice(p.clone())).collect()
            }
        };
        Some(coords)
    }

    // ------------------------------------------------------------------
    // Final resolution
    // ------------------------------------------------------------------

    fn finish(&mut self) -> Option<GameSystem> {
        if self.trivial {
            self.decisions = self
                .actions
                .iter()
                .map(|a| Decision {
                    name: a.action.name.clone(),
                    tags: a.action.tags.clone(),
                    coords: Vec::new(),
                })
                .collect();
            self.decision_pos = self.actions.iter().map(|a| a.pos).collect();
        }

        let mut sys = GameSystem {
            name: self.name.clone(),
            players: self.players.clone(),
            tracks: self.tracks.clone(),
            initial_spec: InitialSpec::States(Vec::new()),
            initial: Vec::new(),
            decisions: self.decisions.clone(),
            actions: self
                .actions
                .iter()
                .map(|a| Action {
                    name: a.action.name.clone(),
                    tags: a.action.tags.clone(),
                    clauses: Vec::new(),
                })
                .collect(),
            trivial_consequences: self.trivial,
            consequence_rules: Vec::new(),
            legality_rules: Vec::new(),
            ending: Slice::Empty,
            outcomes: self.outcomes.clone(),
            outcome_rules: Vec::new(),
            default_outcome: None,
            compiled: Default::default(),
        };

        // Action clauses resolve against the entity tables.
        let drafts: Vec<(usize, Vec<RawClause>, Pos)> = self
            .actions
            .iter()
            .enumerate()
            .map(|(i, a)| (i, a.clauses.clone(), a.pos))
            .collect();
        for (i, clauses, pos) in drafts {
            let mut resolved = Vec::new();
            for c in clauses {
                let Some(guard) = self.resolve_slice(&sys, &c.guard, pos) else { continue };
                let mut writes = Vec::new();
                for w in &c.writes {
                    if let Some(write) = self.resolve_write(&sys, w, pos) {
                        writes.push(write);
                    }
                }
                resolved.push(ActionClause { guard, writes });
            }
            sys.actions[i].clauses = resolved;
        }

        // Rules, in declaration order.
        let pending = std::mem::take(&mut self.pending);
        let mut ending_parts = Vec::new();
        let mut rule_pos: Vec<(DefectSite, Pos)> = Vec::new();
        for p in &pending {
            match p {
                Pending::Init(slice, pos) => {
                    if let Some(s) = self.resolve_slice(&sys, slice, *pos) {
                        match sys.states_in_slice(&s, 1 << 22) {
                            Some(states) if !states.is_empty() => {
                                sys.initial = states;
                                sys.initial_spec = InitialSpec::Slice(s);
                            }
                            Some(_) => {
                                self.error(*pos, "init slice denotes no state");
                            }
                            None => {
                                self.error(*pos, "state space too large to enumerate initial conditions");
                            }
                        }
                    }
                }
                Pending::Ending(slice, pos) => {
                    if let Some(s) = self.resolve_slice(&sys, slice, *pos) {
                        ending_parts.push(s);
                    }
                }
                Pending::Legal { player, decision, slice, otherwise, pos } => {
                    let player = match player {
                        RawPlayerPat::Any => Some(PlayerPattern::Any),
                        RawPlayerPat::Named(n) => {
                            let name = n.literal().unwrap_or_default();
                            match sys.player_named(name) {
                                Some(p) => Some(PlayerPattern::Is(p)),
                                None => {
                                    self.error_sym(*pos, format!("unknown player '{name}'"), name);
                                    None
                                }
                            }
                        }
                    };
                    let decision = self.resolve_selector(&sys, decision, *pos);
                    let slice = self.resolve_slice(&sys, slice, *pos);
                    if let (Some(player), Some(decision), Some(slice)) = (player, decision, slice) {
                        rule_pos.push((DefectSite::LegalityRule(sys.legality_rules.len()), *pos));
                        sys.legality_rules.push(LegalityRule {
                            player,
                            decision,
                            slice,
                            otherwise: *otherwise,
                        });
                    }
                }
                Pending::Consequence { pattern, guard, branches, pos } => {
                    if pattern.len() != sys.players.len() {
                        self.error(
                            *pos,
                            format!(
                                "consequence pattern has {} slots for {} players",
                                pattern.len(),
                                sys.players.len()
                            ),
                        );
                        continue;
                    }
                    let pattern = pattern
                        .iter()
                        .map(|p| self.resolve_pattern(&sys, p, *pos))
                        .collect::<Option<Vec<_>>>();
                    let guard = match guard {
                        Some(g) => self.resolve_slice(&sys, g, *pos),
                        None => Some(Slice::All),
                    };
                    let consequences = branches
                        .iter()
                        .map(|(weight, refs)| {
                            let actions = refs
                                .iter()
                                .map(|r| self.resolve_action_ref(&sys, r, *pos))
                                .collect::<Option<Vec<_>>>()?;
                            Some(Consequence { weight: weight.clone(), actions })
                        })
                        .collect::<Option<Vec<_>>>();
                    if let (Some(pattern), Some(guard), Some(consequences)) =
                        (pattern, guard, consequences)
                    {
                        let total: Prob = consequences.iter().map(|c| c.weight.clone()).sum();
                        if !total.is_one() {
                            self.error(*pos, format!("consequence probabilities sum to {total}, not 1"));
                        }
                        if consequences.iter().any(|c| c.weight <= Prob::zero() || c.weight > Prob::one()) {
                            self.error(*pos, "consequence probability outside (0, 1]");
                        }
                        rule_pos.push((DefectSite::ConsequenceRule(sys.consequence_rules.len()), *pos));
                        sys.consequence_rules.push(ConsequenceRule { pattern, guard, consequences });
                    }
                }
                Pending::Omega { slice, outcome, pos } => {
                    let name = outcome.literal().unwrap_or_default();
                    let Some(o) = sys.outcome_named(name) else {
                        self.error_sym(*pos, format!("unknown outcome '{name}'"), name);
                        continue;
                    };
                    match slice {
                        Some(s) => {
                            if let Some(s) = self.resolve_slice(&sys, s, *pos) {
                                rule_pos.push((DefectSite::OutcomeRule(sys.outcome_rules.len()), *pos));
                                sys.outcome_rules.push(OutcomeRule { slice: s, outcome: o });
                            }
                        }
                        None => {
                            if sys.default_outcome.is_some() {
                                self.error(*pos, "duplicate otherwise outcome");
                            }
                            sys.default_outcome = Some(o);
                        }
                    }
                }
            }
        }
        sys.ending = Slice::or(ending_parts);

        if sys.initial.is_empty() && !matches!(sys.initial_spec, InitialSpec::Slice(_)) {
            self.error(Pos { line: 1, col: 1 }, "init section missing");
        }

        if self.diags.iter().any(|d| d.severity == crate::parse::Severity::Error) {
            return None;
        }

        let defects = validate_system(&sys);
        if !defects.is_empty() {
            for d in &defects {
                let pos = self.site_pos(&d.site, &rule_pos);
                self.error(pos, d.message.clone());
            }
            return None;
        }
        sys.finalize();
        Some(sys)
    }

    fn site_pos(&self, site: &DefectSite, rule_pos: &[(DefectSite, Pos)]) -> Pos {
        let origin = Pos { line: 1, col: 1 };
        match site {
            DefectSite::Player(i) => self.player_pos.get(*i).copied().unwrap_or(origin),
            DefectSite::Track(i) => self.track_pos.get(*i).copied().unwrap_or(origin),
            DefectSite::Decision(i) => self.decision_pos.get(*i).copied().unwrap_or(origin),
            DefectSite::Action(i) => self.actions.get(*i).map(|a| a.pos).unwrap_or(origin),
            _ => rule_pos
                .iter()
                .find(|(s, _)| s == site)
                .map(|(_, p)| *p)
                .unwrap_or(origin),
        }
    }

    fn resolve_selector(
        &mut self,
        sys: &GameSystem,
        pat: &RawDecisionPat,
        pos: Pos,
    ) -> Option<DecisionSelector> {
        match pat {
            RawDecisionPat::Any => Some(DecisionSelector::Any),
            RawDecisionPat::Null => {
                self.error(pos, "the null decision cannot appear in a legality rule");
                None
            }
            RawDecisionPat::Named(n) => {
                let name = n.literal().unwrap_or_default();
                match sys.decision_named(name) {
                    Some(d) => Some(DecisionSelector::Is(d)),
                    None => {
                        self.error_sym(pos, format!("unknown decision '{name}'"), name);
                        None
                    }
                }
            }
            RawDecisionPat::Tagged(tags) => {
                if tags.len() != 1 {
                    self.error(pos, "legality selectors take a single decision tag");
                    return None;
                }
                let tag = tags[0].literal().unwrap_or_default().to_string();
                if !sys.decisions.iter().any(|d| d.tags.contains(&tag)) {
                    self.error_sym(pos, format!("no decision carries tag '{tag}'"), &tag);
                    return None;
                }
                Some(DecisionSelector::Tagged(tag))
            }
        }
    }

    fn resolve_pattern(
        &mut self,
        sys: &GameSystem,
        pat: &RawDecisionPat,
        pos: Pos,
    ) -> Option<DecisionPattern> {
        match pat {
            RawDecisionPat::Any => Some(DecisionPattern::Any),
            RawDecisionPat::Null => Some(DecisionPattern::Null),
            RawDecisionPat::Named(n) => {
                let name = n.literal().unwrap_or_default();
                match sys.decision_named(name) {
                    Some(d) => Some(DecisionPattern::Is(d)),
                    None => {
                        self.error_sym(pos, format!("unknown decision '{name}'"), name);
                        None
                    }
                }
            }
            RawDecisionPat::Tagged(_) => {
                self.error(pos, "tag patterns are not supported in consequence position");
                None
            }
        }
    }

    fn resolve_action_ref(
        &mut self,
        sys: &GameSystem,
        r: &RawActionRef,
        pos: Pos,
    ) -> Option<ActionId> {
        match r {
            RawActionRef::Named(n) => {
                let name = n.literal().unwrap_or_default();
                match sys.action_named(name) {
                    Some(a) => Some(a),
                    None => {
                        self.error_sym(pos, format!("unknown action '{name}'"), name);
                        None
                    }
                }
            }
            RawActionRef::Call(call) => match self.eval_call(sys, call)? {
                LudemeValue::Action(a) => Some(a),
                LudemeValue::Slice(_) => {
                    self.error(pos, "ludeme returns a slice where an action is required");
                    None
                }
            },
        }
    }

    fn eval_call(&mut self, sys: &GameSystem, call: &RawCall) -> Option<LudemeValue> {
        let name = call.name.literal().unwrap_or_default().to_string();
        let ludeme = match self.catalog.lookup(&name) {
            Ok(l) => l.clone(),
            Err(_) => {
                self.error_sym(call.pos, format!("unknown ludeme '{name}'"), &name);
                return None;
            }
        };
        if call.args.len() != ludeme.signature.len() {
            self.error(
                call.pos,
                format!("ludeme '{name}' expects {} arguments, got {}", ludeme.signature.len(), call.args.len()),
            );
            return None;
        }
        let mut args = Vec::new();
        for (raw, kind) in call.args.iter().zip(&ludeme.signature) {
            let arg = match (raw, kind) {
                (RawArg::TagSet(tags), ArgKind::TrackSet) => {
                    let tags: Vec<String> =
                        tags.iter().map(|t| t.literal().unwrap_or_default().to_string()).collect();
                    let refs: Vec<&str> = tags.iter().map(|s| s.as_str()).collect();
                    let tracks = sys.tracks_tagged(&refs);
                    if tracks.is_empty() {
                        self.error(call.pos, format!("no track carries tags ({})", tags.join(",")));
                        return None;
                    }
                    LudemeArg::Tracks(tracks)
                }
                (RawArg::Name(n), ArgKind::Decision) => {
                    let name = n.literal().unwrap_or_default();
                    match sys.decision_named(name) {
                        Some(d) => LudemeArg::Decision(d),
                        None => {
                            self.error_sym(call.pos, format!("unknown decision '{name}'"), name);
                            return None;
                        }
                    }
                }
                (RawArg::Name(n), ArgKind::Action) => {
                    let name = n.literal().unwrap_or_default();
                    match sys.action_named(name) {
                        Some(a) => LudemeArg::Action(a),
                        None => {
                            self.error_sym(call.pos, format!("unknown action '{name}'"), name);
                            return None;
                        }
                    }
                }
                (RawArg::Name(n), ArgKind::ValueName) => {
                    LudemeArg::Value(n.literal().unwrap_or_default().to_string())
                }
                (RawArg::Int(v), ArgKind::ValueName) => LudemeArg::Value(v.to_string()),
                (RawArg::Int(v), ArgKind::Int) => LudemeArg::Int(*v),
                _ => {
                    self.error(call.pos, format!("ludeme '{name}': argument kind mismatch"));
                    return None;
                }
            };
            args.push(arg);
        }
        match ludeme.evaluate(sys, &args) {
            Ok(v) => Some(v),
            Err(e) => {
                self.error(call.pos, e.to_string());
                None
            }
        }
    }

    fn resolve_track(&mut self, sys: &GameSystem, name: &Name, pos: Pos) -> Option<TrackId> {
        let n = name.literal().unwrap_or_default();
        match sys.track_named(n) {
            Some(t) => Some(t),
            None => {
                self.error_sym(pos, format!("unknown track '{n}'"), n);
                None
            }
        }
    }

    fn resolve_value(&mut self, sys: &GameSystem, t: TrackId, name: &str, pos: Pos) -> Option<ValueId> {
        match sys.tracks[t.0].value_named(name) {
            Some(v) => Some(v),
            None => {
                self.error_sym(
                    pos,
                    format!("track '{}' has no value '{name}'", sys.tracks[t.0].name),
                    name,
                );
                None
            }
        }
    }

    fn resolve_write(&mut self, sys: &GameSystem, w: &RawWrite, pos: Pos) -> Option<Write> {
        let track = self.resolve_track(sys, &w.track, pos)?;
        let expr = match &w.rhs {
            RawWriteRhs::Value(n) => {
                let v = self.resolve_value(sys, track, n.literal().unwrap_or_default(), pos)?;
                WriteExpr::Value(v)
            }
            RawWriteRhs::Shift { delta, coord_index } => {
                let index = coord_index.unwrap_or(1) as usize - 1;
                WriteExpr::Coord {
                    index,
                    expr: CoordExpr::Add(
                        Box::new(CoordExpr::ValueCoord(track)),
                        Box::new(CoordExpr::Const(*delta)),
                    ),
                }
            }
            RawWriteRhs::Expr { term, coord_index } => {
                let index = coord_index.unwrap_or(1) as usize - 1;
                let expr = self.runtime_expr(sys, term, pos)?;
                WriteExpr::Coord { index, expr }
            }
        };
        Some(Write { track, expr })
    }

    /// Converts a term into a runtime coordinate expression; symbols must be
    /// numeric by now.
    fn runtime_expr(&mut self, sys: &GameSystem, term: &Term, pos: Pos) -> Option<CoordExpr> {
        match term {
            Term::Int(v) => Some(CoordExpr::Const(*v)),
            Term::ValueOf(n) => {
                let t = self.resolve_track(sys, n, pos)?;
                Some(CoordExpr::ValueCoord(t))
            }
            Term::TrackCoordOf(n) => {
                let t = self.resolve_track(sys, n, pos)?;
                let k = sys.tracks[t.0].coords.iter().find_map(|c| c.coord.as_scalar());
                match k {
                    Some(k) => Some(CoordExpr::Const(k)),
                    None => {
                        self.error(pos, format!("track '{}' has no scalar coordinate", sys.tracks[t.0].name));
                        None
                    }
                }
            }
            Term::Sym(n) => {
                let s = n.literal().unwrap_or_default();
                self.error_sym(pos, format!("'{s}' is not a number or track reference"), s);
                None
            }
            Term::Add(a, b) => Some(CoordExpr::Add(
                Box::new(self.runtime_expr(sys, a, pos)?),
                Box::new(self.runtime_expr(sys, b, pos)?),
            )),
            Term::Sub(a, b) => Some(CoordExpr::Sub(
                Box::new(self.runtime_expr(sys, a, pos)?),
                Box::new(self.runtime_expr(sys, b, pos)?),
            )),
            Term::Neg(a) => Some(CoordExpr::Neg(Box::new(self.runtime_expr(sys, a, pos)?))),
        }
    }

    fn resolve_slice(&mut self, sys: &GameSystem, slice: &RawSlice, pos: Pos) -> Option<Slice> {
        match slice {
            RawSlice::All => Some(Slice::All),
            RawSlice::Empty => Some(Slice::Empty),
            RawSlice::Is { value, track } => {
                let t = self.resolve_track(sys, track, track.pos)?;
                let v = self.resolve_value(sys, t, value.literal().unwrap_or_default(), value.pos)?;
                Some(Slice::Is(t, v))
            }
            RawSlice::TagProduct { value, tags } => {
                let tag_strings: Vec<String> =
                    tags.iter().map(|t| t.literal().unwrap_or_default().to_string()).collect();
                let refs: Vec<&str> = tag_strings.iter().map(|s| s.as_str()).collect();
                let tracks = sys.tracks_tagged(&refs);
                if tracks.is_empty() {
                    self.error(
                        value.pos,
                        format!("no track carries tags ({})", tag_strings.join(",")),
                    );
                    return None;
                }
                let vname = value.literal().unwrap_or_default().to_string();
                let mut parts = Vec::new();
                for t in tracks {
                    let v = self.resolve_value(sys, t, &vname, value.pos)?;
                    parts.push(Slice::Is(t, v));
                }
                Some(Slice::and(parts))
            }
            RawSlice::Bracket(bracket, bpos) => self.resolve_bracket(sys, bracket, *bpos),
            RawSlice::Call(call) => match self.eval_call(sys, call)? {
                LudemeValue::Slice(s) => Some(s),
                LudemeValue::Action(_) => {
                    self.error(call.pos, "ludeme returns an action where a slice is required");
                    None
                }
            },
            RawSlice::Not(inner) => Some(Slice::Not(Box::new(self.resolve_slice(sys, inner, pos)?))),
            RawSlice::And(parts) => {
                let parts = parts
                    .iter()
                    .map(|p| self.resolve_slice(sys, p, pos))
                    .collect::<Option<Vec<_>>>()?;
                Some(Slice::and(parts))
            }
            RawSlice::Or(parts) => {
                let parts = parts
                    .iter()
                    .map(|p| self.resolve_slice(sys, p, pos))
                    .collect::<Option<Vec<_>>>()?;
                Some(Slice::or(parts))
            }
        }
    }

    fn resolve_bracket(&mut self, sys: &GameSystem, bracket: &RawBracket, pos: Pos) -> Option<Slice> {
        match bracket {
            RawBracket::Membership { subject, tags } => {
                let tag_strings: BTreeSet<String> =
                    tags.iter().map(|t| t.literal().unwrap_or_default().to_string()).collect();
                match subject {
                    // [v(t) in (tags)]: the track's current value carries the tags.
                    Term::ValueOf(n) => {
                        let t = self.resolve_track(sys, n, pos)?;
                        let values: Vec<ValueId> = sys.tracks[t.0]
                            .values
                            .iter()
                            .enumerate()
                            .filter(|(_, v)| tag_strings.iter().all(|tag| v.tags.contains(tag)))
                            .map(|(i, _)| ValueId(i))
                            .collect();
                        if values.is_empty() {
                            Some(Slice::Empty)
                        } else {
                            Some(Slice::InSet(t, values))
                        }
                    }
                    // [name in (tags)]: a parse-time membership test on the
                    // named element's tags.
                    Term::Sym(n) => {
                        let name = n.literal().unwrap_or_default();
                        let element_tags = self.element_tags(sys, name, pos)?;
                        if tag_strings.iter().all(|t| element_tags.contains(t)) {
                            Some(Slice::All)
                        } else {
                            Some(Slice::Empty)
                        }
                    }
                    Term::Int(v) => {
                        let name = v.to_string();
                        let element_tags = self.element_tags(sys, &name, pos)?;
                        if tag_strings.iter().all(|t| element_tags.contains(t)) {
                            Some(Slice::All)
                        } else {
                            Some(Slice::Empty)
                        }
                    }
                    _ => {
                        self.error(pos, "membership subject must be a name or v(track)");
                        None
                    }
                }
            }
            RawBracket::MembershipValues { subject, values } => match subject {
                Term::ValueOf(n) => {
                    let t = self.resolve_track(sys, n, pos)?;
                    let ids = values
                        .iter()
                        .map(|v| self.resolve_value(sys, t, v.literal().unwrap_or_default(), pos))
                        .collect::<Option<Vec<_>>>()?;
                    Some(Slice::InSet(t, ids))
                }
                _ => {
                    self.error(pos, "value-set membership needs a v(track) subject");
                    None
                }
            },
            RawBracket::Cmp { lhs, op, rhs, coord_index } => {
                if term_has_value_ref(lhs) || term_has_value_ref(rhs) {
                    let index = coord_index.unwrap_or(1) as usize - 1;
                    let l = self.runtime_expr(sys, lhs, pos)?;
                    let r = self.runtime_expr(sys, rhs, pos)?;
                    let mut tracks = Vec::new();
                    l.tracks(&mut tracks);
                    r.tracks(&mut tracks);
                    let mut modulus = None;
                    for t in &tracks {
                        match sys.tracks[t.0].value_coords.get(index).map(|vc| &vc.space) {
                            Some(CoordSpace::Mod(m)) => modulus = Some(*m),
                            Some(CoordSpace::Int) => {}
                            _ => {
                                self.error(
                                    pos,
                                    format!(
                                        "track '{}' has no scalar coordinate {}",
                                        sys.tracks[t.0].name,
                                        index + 1
                                    ),
                                );
                                return None;
                            }
                        }
                    }
                    Some(Slice::Cmp(CmpAtom { lhs: l, op: *op, rhs: r, coord_index: index, modulus }))
                } else {
                    // No state reference: fold now.
                    let l = self.fold_term(sys, lhs, pos)?;
                    let r = self.fold_term(sys, rhs, pos)?;
                    let truth = match (l, r) {
                        (Folded::Int(a), Folded::Int(b)) => op.apply(a, b),
                        (Folded::Text(a), Folded::Text(b)) => match op {
                            CmpOp::Eq => a == b,
                            CmpOp::Ne => a != b,
                            _ => {
                                self.error(pos, "order comparisons need numeric operands");
                                return None;
                            }
                        },
                        _ => {
                            self.error(pos, "comparison mixes a name with a number");
                            return None;
                        }
                    };
                    Some(if truth { Slice::All } else { Slice::Empty })
                }
            }
        }
    }

    fn element_tags(&mut self, sys: &GameSystem, name: &str, pos: Pos) -> Option<BTreeSet<String>> {
        if let Some(t) = sys.track_named(name) {
            return Some(sys.tracks[t.0].tags.clone());
        }
        if let Some(p) = sys.player_named(name) {
            return Some(sys.players[p.0].tags.clone());
        }
        if let Some(d) = sys.decision_named(name) {
            return Some(sys.decisions[d.0].tags.clone());
        }
        if let Some(a) = sys.action_named(name) {
            return Some(sys.actions[a.0].tags.clone());
        }
        self.error_sym(pos, format!("unknown element '{name}' in membership test"), name);
        None
    }

    fn fold_term(&mut self, sys: &GameSystem, term: &Term, pos: Pos) -> Option<Folded> {
        match term {
            Term::Int(v) => Some(Folded::Int(*v)),
            Term::Sym(n) => Some(Folded::Text(n.literal().unwrap_or_default().to_string())),
            Term::TrackCoordOf(n) => {
                let t = self.resolve_track(sys, n, pos)?;
                match sys.tracks[t.0].coords.iter().find_map(|c| c.coord.as_scalar()) {
                    Some(k) => Some(Folded::Int(k)),
                    None => {
                        self.error(pos, format!("track '{}' has no scalar coordinate", sys.tracks[t.0].name));
                        None
                    }
                }
            }
            Term::ValueOf(_) => unreachable!("state-dependent terms take the runtime path"),
            Term::Add(a, b) => self.fold_arith(sys, a, b, pos, |x, y| x + y),
            Term::Sub(a, b) => self.fold_arith(sys, a, b, pos, |x, y| x - y),
            Term::Neg(a) => match self.fold_term(sys, a, pos)? {
                Folded::Int(v) => Some(Folded::Int(-v)),
                Folded::Text(_) => {
                    self.error(pos, "cannot negate a name");
                    None
                }
            },
        }
    }

    fn fold_arith(
        &mut self,
        sys: &GameSystem,
        a: &Term,
        b: &Term,
        pos: Pos,
        f: impl Fn(i64, i64) -> i64,
    ) -> Option<Folded> {
        match (self.fold_term(sys, a, pos)?, self.fold_term(sys, b, pos)?) {
            (Folded::Int(x), Folded::Int(y)) => Some(Folded::Int(f(x, y))),
            _ => {
                self.error(pos, "arithmetic needs numeric operands");
                None
            }
        }
    }
}

enum Folded {
    Int(i64),
    Text(String),
}

fn term_has_value_ref(term: &Term) -> bool {
    match term {
        Term::ValueOf(_) => true,
        Term::Int(_) | Term::Sym(_) | Term::TrackCoordOf(_) => false,
        Term::Add(a, b) | Term::Sub(a, b) => term_has_value_ref(a) || term_has_value_ref(b),
        Term::Neg(a) => term_has_value_ref(a),
    }
}

fn spec_space(spec: &RawCoordSpec) -> CoordSpace {
    match spec {
        RawCoordSpec::Mod(m) => CoordSpace::Mod(*m),
        RawCoordSpec::Interval(..) | RawCoordSpec::Ints(_) => CoordSpace::Int,
        RawCoordSpec::Lattice(points) => {
            CoordSpace::Lattice(points.first().map(|p| p.len()).unwrap_or(1))
        }
    }
}

fn join_tags(tags: &BTreeSet<String>) -> String {
    tags.iter().cloned().collect::<Vec<_>>().join(",")
}
