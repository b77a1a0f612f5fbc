//! Raw declarations as parsed, before comprehension expansion and name
//! resolution. Names are templates that may contain `{var}` holes bound by
//! an enclosing `forall`.

use crate::parse::Pos;
use crate::rational::Prob;

/// A name with optional template holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Name {
    pub frags: Vec<Frag>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frag {
    Text(String),
    Var(String),
}

impl Name {
    pub fn plain(text: &str, pos: Pos) -> Self {
        Name { frags: vec![Frag::Text(text.to_string())], pos }
    }

    pub fn is_template(&self) -> bool {
        self.frags.iter().any(|f| matches!(f, Frag::Var(_)))
    }

    /// The literal text when the name has no holes.
    pub fn literal(&self) -> Option<&str> {
        match self.frags.as_slice() {
            [Frag::Text(t)] => Some(t),
            _ => None,
        }
    }
}

/// Terms inside Boolean brackets and coordinate write expressions.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Int(i64),
    /// `v(track)`: coordinate of the track's current value.
    ValueOf(Name),
    /// `phi(track)`: the track's own coordinate; folds at expansion.
    TrackCoordOf(Name),
    /// A bare name: an integer after substitution, or a symbol compared
    /// textually in parse-time brackets.
    Sym(Name),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Neg(Box<Term>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawBracket {
    /// `[a <op> b]@k`
    Cmp { lhs: Term, op: crate::model::CmpOp, rhs: Term, coord_index: Option<u32> },
    /// `[x in (tags)]` or `[v(t) in (tags)]`
    Membership { subject: Term, tags: Vec<Name> },
    /// `[v(t) in {v1, v2}]`: explicit value set.
    MembershipValues { subject: Term, values: Vec<Name> },
}

/// Slice expressions over raw names.
#[derive(Debug, Clone, PartialEq)]
pub enum RawSlice {
    All,
    Empty,
    /// `(value)@track`
    Is { value: Name, track: Name },
    /// `(value)@(tags)`: product over all tracks carrying every tag.
    TagProduct { value: Name, tags: Vec<Name> },
    Bracket(RawBracket, Pos),
    /// A ludemic function call returning a slice.
    Call(RawCall),
    Not(Box<RawSlice>),
    And(Vec<RawSlice>),
    Or(Vec<RawSlice>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawCall {
    pub name: Name,
    pub args: Vec<RawArg>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawArg {
    /// `(tag, tag)` — a set of tracks by tags.
    TagSet(Vec<Name>),
    Name(Name),
    Int(i64),
}

/// Right-hand side of an action write.
#[derive(Debug, Clone, PartialEq)]
pub enum RawWriteRhs {
    /// Literal value name.
    Value(Name),
    /// `+k` / `-k` with optional `@index`: increment in a coordinate space.
    Shift { delta: i64, coord_index: Option<u32> },
    /// `[expr]@index`: assign the value whose coordinate matches.
    Expr { term: Term, coord_index: Option<u32> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawWrite {
    pub track: Name,
    pub rhs: RawWriteRhs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawClause {
    pub guard: RawSlice,
    pub writes: Vec<RawWrite>,
}

/// Value-coordinate specification attached with `~`.
#[derive(Debug, Clone, PartialEq)]
pub enum RawCoordSpec {
    /// `mod m`: residues 0..m-1 in declaration order.
    Mod(u64),
    /// `[a,b]`: the integers a..=b in declaration order.
    Interval(i64, i64),
    /// `ints k1 k2 ...`: explicit integers.
    Ints(Vec<i64>),
    /// `lats (x,y) (x,y) ...`: explicit lattice points.
    Lattice(Vec<Vec<i64>>),
}

/// Coordinate of a track itself: `@ k` or `@ (x,y,...)`.
#[derive(Debug, Clone, PartialEq)]
pub enum RawTrackCoord {
    Int(Term),
    Lattice(Vec<Term>),
}

/// One value item in a track declaration: a named value or an interval that
/// expands to integer-named values.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValueItem {
    Named { name: Name, tags: Vec<Name> },
    Interval(i64, i64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawPlayerPat {
    Any,
    Named(Name),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawDecisionPat {
    Any,
    Null,
    Named(Name),
    Tagged(Vec<Name>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawActionRef {
    Named(Name),
    Call(RawCall),
}

/// `forall` binder source.
#[derive(Debug, Clone, PartialEq)]
pub enum RawSetExpr {
    Range(i64, i64),
    Names(Vec<Name>),
    /// `(tags)`: tracks carrying every tag.
    TrackTags(Vec<Name>),
    Players,
    Decisions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawBinder {
    pub var: String,
    pub set: RawSetExpr,
    pub pos: Pos,
}

/// `where` condition: conjunction of equality tests between terms.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCond {
    pub lhs: Term,
    pub negated: bool,
    pub rhs: Term,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Game(Name),
    Players(Vec<(Name, Vec<Name>)>),
    Track {
        name: Name,
        tags: Vec<Name>,
        coord: Option<RawTrackCoord>,
        values: Vec<RawValueItem>,
        coord_specs: Vec<RawCoordSpec>,
    },
    Init(RawSlice),
    DecisionsFromActions,
    Decisions {
        items: Vec<(Name, Vec<Name>)>,
        coord_specs: Vec<RawCoordSpec>,
    },
    Action {
        name: Name,
        tags: Vec<Name>,
        clauses: Vec<RawClause>,
    },
    Consequence {
        pattern: Vec<RawDecisionPat>,
        guard: Option<RawSlice>,
        branches: Vec<(Prob, Vec<RawActionRef>)>,
    },
    Legal {
        player: RawPlayerPat,
        decision: RawDecisionPat,
        slice: RawSlice,
        otherwise: bool,
    },
    Ending(RawSlice),
    Outcomes(Vec<(Name, Vec<Name>)>),
    Omega {
        slice: Option<RawSlice>,
        outcome: Name,
    },
    /// Catalog imports; informative.
    Ludemes(Vec<Name>),
    Forall {
        binders: Vec<RawBinder>,
        conds: Vec<RawCond>,
        body: Box<Spanned>,
    },
}

/// A declaration plus its source position.
#[derive(Debug, Clone, PartialEq)]
pub struct Spanned {
    pub decl: Decl,
    pub pos: Pos,
}
