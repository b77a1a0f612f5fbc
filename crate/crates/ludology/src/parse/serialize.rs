//! Canonical text output. `parse_system(serialize_system(sys))` yields a
//! system structurally identical to `sys`: comprehensions and ludeme calls
//! were expanded at parse time, so the writer emits concrete declarations.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::model::{
    Action, CoordExpr, CoordSpace, DecisionPattern, DecisionSelector, GameSystem, InitialSpec,
    PlayerPattern, Slice, Track, WriteExpr,
};
use crate::rational::format_prob;

const RESERVED: &[&str] = &[
    "game", "players", "track", "init", "decisions", "actions", "action", "consequence", "legal",
    "ending", "outcomes", "omega", "forall", "ludemes", "otherwise", "all", "empty", "none", "in",
    "if", "where", "mod", "ints", "lats", "v", "phi", "memory", "foresight",
];

fn quoted(name: &str) -> String {
    let safe = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_alphanumeric() || c == '_' || c == '\'' || c == '-')
        && !RESERVED.contains(&name);
    if safe {
        name.to_string()
    } else {
        format!("\"{name}\"")
    }
}

fn tag_suffix(tags: &BTreeSet<String>) -> String {
    if tags.is_empty() {
        String::new()
    } else {
        format!("[{}]", tags.iter().map(|t| quoted(t)).collect::<Vec<_>>().join(","))
    }
}

/// Serializes a system as canonical description text.
pub fn serialize_system(sys: &GameSystem) -> String {
    let mut out = String::new();
    let w = &mut out;

    let _ = writeln!(w, "game {}", quoted(&sys.name));

    let players: Vec<String> =
        sys.players.iter().map(|p| format!("{}{}", quoted(&p.name), tag_suffix(&p.tags))).collect();
    let _ = writeln!(w, "players {}", players.join(" "));

    for t in &sys.tracks {
        let _ = writeln!(w, "{}", track_line(sys, t));
    }

    match &sys.initial_spec {
        InitialSpec::Slice(s) => {
            let _ = writeln!(w, "init {}", slice_text(sys, s));
        }
        InitialSpec::States(states) => {
            let parts: Vec<String> = states
                .iter()
                .map(|s| {
                    if sys.tracks.is_empty() {
                        "all".to_string()
                    } else {
                        let conj: Vec<String> = sys
                            .tracks
                            .iter()
                            .enumerate()
                            .map(|(i, t)| {
                                format!(
                                    "({})@{}",
                                    quoted(&t.values[s.value(crate::ids::TrackId(i)).0].name),
                                    quoted(&t.name)
                                )
                            })
                            .collect();
                        conj.join(" & ")
                    }
                })
                .collect();
            let _ = writeln!(w, "init {}", parts.join(" | "));
        }
    }

    if sys.trivial_consequences {
        let _ = writeln!(w, "decisions ~ actions");
    } else if !sys.decisions.is_empty() {
        let items: Vec<String> = sys
            .decisions
            .iter()
            .map(|d| format!("{}{}", quoted(&d.name), tag_suffix(&d.tags)))
            .collect();
        let mut line = format!("decisions {}", items.join(" "));
        if let Some(specs) = decision_coord_specs(sys) {
            if !specs.is_empty() {
                let _ = write!(line, " ~ {}", specs.join(", "));
            }
        }
        let _ = writeln!(w, "{line}");
    }

    for a in &sys.actions {
        let _ = writeln!(w, "{}", action_line(sys, a));
    }

    for rule in &sys.consequence_rules {
        let pattern: Vec<String> = rule
            .pattern
            .iter()
            .map(|p| match p {
                DecisionPattern::Any => "*".to_string(),
                DecisionPattern::Null => "0".to_string(),
                DecisionPattern::Is(d) => quoted(&sys.decisions[d.0].name),
            })
            .collect();
        let guard = if rule.guard == Slice::All {
            String::new()
        } else {
            format!(" if {}", slice_text(sys, &rule.guard))
        };
        let branches: Vec<String> = rule
            .consequences
            .iter()
            .map(|c| {
                let actions: Vec<String> =
                    c.actions.iter().map(|a| quoted(&sys.actions[a.0].name)).collect();
                format!("{} {}", format_prob(&c.weight), actions.join(" "))
            })
            .collect();
        let _ = writeln!(w, "consequence ({}){} : {}", pattern.join(", "), guard, branches.join(" ; "));
    }

    for rule in &sys.legality_rules {
        if rule.otherwise {
            let _ = writeln!(w, "legal otherwise : {}", slice_text(sys, &rule.slice));
            continue;
        }
        let p = match &rule.player {
            PlayerPattern::Any => "*".to_string(),
            PlayerPattern::Is(p) => quoted(&sys.players[p.0].name),
        };
        let d = match &rule.decision {
            DecisionSelector::Any => "*".to_string(),
            DecisionSelector::Is(d) => quoted(&sys.decisions[d.0].name),
            DecisionSelector::Tagged(t) => format!("({})", quoted(t)),
        };
        let _ = writeln!(w, "legal {} {} : {}", p, d, slice_text(sys, &rule.slice));
    }

    if sys.ending != Slice::Empty {
        let _ = writeln!(w, "ending {}", slice_text(sys, &sys.ending));
    }

    if !sys.outcomes.is_empty() {
        let items: Vec<String> = sys.outcomes.iter().map(|o| quoted(o)).collect();
        let _ = writeln!(w, "outcomes {}", items.join(" "));
    }

    for rule in &sys.outcome_rules {
        let _ = writeln!(
            w,
            "omega {} -> {}",
            slice_text(sys, &rule.slice),
            quoted(&sys.outcomes[rule.outcome.0])
        );
    }
    if let Some(d) = sys.default_outcome {
        let _ = writeln!(w, "omega otherwise -> {}", quoted(&sys.outcomes[d.0]));
    }

    out
}

fn track_line(sys: &GameSystem, t: &Track) -> String {
    let mut line = format!("track {}{}", quoted(&t.name), tag_suffix(&t.tags));

    // The single expressible track coordinate; an integer coordinate equal
    // to a numeric name is implicit and omitted.
    if let Some(first) = t.coords.first() {
        match &first.coord {
            crate::model::Coord::Int(k) => {
                if t.name.parse::<i64>() != Ok(*k) {
                    let _ = write!(line, " @ {k}");
                }
            }
            crate::model::Coord::Lattice(p) => {
                let parts: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                let _ = write!(line, " @ ({})", parts.join(","));
            }
            _ => {}
        }
    }

    let values: Vec<String> = t
        .values
        .iter()
        .map(|v| format!("{}{}", quoted(&v.name), tag_suffix(&v.tags)))
        .collect();
    let _ = write!(line, " : {}", values.join(" "));

    let specs: Vec<String> = t.value_coords.iter().filter_map(|vc| coord_spec_text(&vc.space, &vc.coords)).collect();
    if specs.len() == t.value_coords.len() && !specs.is_empty() {
        let _ = write!(line, " ~ {}", specs.join(", "));
    }
    let _ = sys;
    line
}

/// Renders one value-coordinate assignment as a `~` spec, if expressible.
fn coord_spec_text(space: &CoordSpace, coords: &[crate::model::Coord]) -> Option<String> {
    match space {
        CoordSpace::Mod(m) => {
            let canonical = coords
                .iter()
                .enumerate()
                .all(|(i, c)| matches!(c, crate::model::Coord::Mod(r) if *r == i as u64));
            if canonical && coords.len() as u64 == *m {
                Some(format!("mod {m}"))
            } else {
                None
            }
        }
        CoordSpace::Int => {
            let ints: Option<Vec<i64>> = coords
                .iter()
                .map(|c| match c {
                    crate::model::Coord::Int(k) => Some(*k),
                    _ => None,
                })
                .collect();
            let ints = ints?;
            let contiguous = ints.windows(2).all(|w| w[1] == w[0] + 1);
            if contiguous && !ints.is_empty() {
                Some(format!("[{},{}]", ints[0], ints[ints.len() - 1]))
            } else {
                let parts: Vec<String> = ints.iter().map(|v| v.to_string()).collect();
                Some(format!("ints {}", parts.join(" ")))
            }
        }
        CoordSpace::Lattice(_) => {
            let points: Option<Vec<String>> = coords
                .iter()
                .map(|c| {
                    c.as_lattice().map(|p| {
                        format!("({})", p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
                    })
                })
                .collect();
            Some(format!("lats {}", points?.join(" ")))
        }
        CoordSpace::Graph(_) => None,
    }
}

fn decision_coord_specs(sys: &GameSystem) -> Option<Vec<String>> {
    let n_specs = sys.decisions.first().map(|d| d.coords.len()).unwrap_or(0);
    if sys.decisions.iter().any(|d| d.coords.len() != n_specs) {
        return None;
    }
    let mut out = Vec::new();
    for k in 0..n_specs {
        let space = &sys.decisions[0].coords[k].space;
        if sys.decisions.iter().any(|d| &d.coords[k].space != space) {
            return None;
        }
        let coords: Vec<crate::model::Coord> =
            sys.decisions.iter().map(|d| d.coords[k].coord.clone()).collect();
        out.push(coord_spec_text(space, &coords)?);
    }
    Some(out)
}

fn action_line(sys: &GameSystem, a: &Action) -> String {
    let mut line = format!("action {}{}", quoted(&a.name), tag_suffix(&a.tags));
    if a.clauses.is_empty() {
        return line;
    }
    let clauses: Vec<String> = a
        .clauses
        .iter()
        .map(|c| {
            let writes: Vec<String> = c
                .writes
                .iter()
                .map(|wr| {
                    let track = &sys.tracks[wr.track.0];
                    match &wr.expr {
                        WriteExpr::Value(v) => {
                            format!("{} = {}", quoted(&track.name), quoted(&track.values[v.0].name))
                        }
                        WriteExpr::Coord { index, expr } => format!(
                            "{} = [{}]@{}",
                            quoted(&track.name),
                            expr_text(sys, expr),
                            index + 1
                        ),
                    }
                })
                .collect();
            format!("{} -> {}", slice_text(sys, &c.guard), writes.join(", "))
        })
        .collect();
    let _ = write!(line, " : {}", clauses.join(" :: "));
    line
}

fn expr_text(sys: &GameSystem, e: &CoordExpr) -> String {
    match e {
        CoordExpr::Const(k) => k.to_string(),
        CoordExpr::ValueCoord(t) => format!("v({})", quoted(&sys.tracks[t.0].name)),
        CoordExpr::Add(a, b) => format!("{} + {}", expr_text(sys, a), wrap_expr(sys, b)),
        CoordExpr::Sub(a, b) => format!("{} - {}", expr_text(sys, a), wrap_expr(sys, b)),
        CoordExpr::Neg(a) => format!("- {}", wrap_expr(sys, a)),
    }
}

fn wrap_expr(sys: &GameSystem, e: &CoordExpr) -> String {
    match e {
        CoordExpr::Const(_) | CoordExpr::ValueCoord(_) => expr_text(sys, e),
        _ => format!("({})", expr_text(sys, e)),
    }
}

/// Renders a slice with precedence-aware wrapping: `|` binds loosest, then
/// `&`, then `!`.
pub(crate) fn slice_text(sys: &GameSystem, s: &Slice) -> String {
    match s {
        Slice::All => "all".to_string(),
        Slice::Empty => "empty".to_string(),
        Slice::Is(t, v) => format!(
            "({})@{}",
            quoted(&sys.tracks[t.0].values[v.0].name),
            quoted(&sys.tracks[t.0].name)
        ),
        Slice::InSet(t, vs) => {
            let names: Vec<String> =
                vs.iter().map(|v| quoted(&sys.tracks[t.0].values[v.0].name)).collect();
            format!("[v({}) in {{{}}}]", quoted(&sys.tracks[t.0].name), names.join(", "))
        }
        Slice::Cmp(atom) => format!(
            "[{} {} {}]@{}",
            expr_text(sys, &atom.lhs),
            atom.op.symbol(),
            expr_text(sys, &atom.rhs),
            atom.coord_index + 1
        ),
        Slice::Not(inner) => match inner.as_ref() {
            Slice::And(_) | Slice::Or(_) => format!("!({})", slice_text(sys, inner)),
            _ => format!("!{}", slice_text(sys, inner)),
        },
        Slice::And(parts) => {
            let rendered: Vec<String> = parts
                .iter()
                .map(|p| match p {
                    Slice::Or(_) | Slice::And(_) => format!("({})", slice_text(sys, p)),
                    _ => slice_text(sys, p),
                })
                .collect();
            rendered.join(" & ")
        }
        Slice::Or(parts) => {
            let rendered: Vec<String> = parts
                .iter()
                .map(|p| match p {
                    Slice::Or(_) => format!("({})", slice_text(sys, p)),
                    _ => slice_text(sys, p),
                })
                .collect();
            rendered.join(" | ")
        }
    }
}
