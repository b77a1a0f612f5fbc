//! Recursive-descent parser from tokens to raw declarations.

use crate::model::CmpOp;
use crate::parse::ast::*;
use crate::parse::lexer::{Tok, Token};
use crate::parse::{Diagnostic, Pos, Section};
use crate::rational::Prob;
use num_bigint::BigInt;

struct Cursor<'a> {
    toks: &'a [Token],
    i: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl<'a> Cursor<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.i + 1).map(|t| &t.tok)
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].pos
    }

    fn at_end(&self) -> bool {
        self.i >= self.toks.len()
    }

    fn advance(&mut self) -> &'a Token {
        let t = &self.toks[self.i];
        self.i += 1;
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if !self.at_end() && self.peek() == tok {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<&'a Token> {
        if !self.at_end() && *self.peek() == tok {
            Ok(self.advance())
        } else {
            Err(Diagnostic::error(self.pos(), format!("expected {what}")))
        }
    }

    fn eat_ident(&mut self, word: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(w) if w == word) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    /// True when the next token begins exactly where the previous ended.
    fn adjacent(&self) -> bool {
        self.i > 0
            && self.i < self.toks.len()
            && self.toks[self.i - 1].end == self.toks[self.i].start
    }

    fn skip_to_newline(&mut self) {
        while !self.at_end() && *self.peek() != Tok::Newline {
            self.i += 1;
        }
        if !self.at_end() {
            self.i += 1;
        }
    }

    /// Parses a possibly-templated name: adjacent runs of identifier
    /// fragments, integers, dashes, and `{var}` holes. A quoted string is
    /// always a single plain name.
    fn name(&mut self) -> PResult<Name> {
        let pos = self.pos();
        if let Tok::Quoted(s) = self.peek() {
            let s = s.clone();
            self.advance();
            return Ok(Name::plain(&s, pos));
        }
        let mut frags: Vec<Frag> = Vec::new();
        let push_text = |frags: &mut Vec<Frag>, text: &str| match frags.last_mut() {
            Some(Frag::Text(t)) => t.push_str(text),
            _ => frags.push(Frag::Text(text.to_string())),
        };
        let mut first = true;
        loop {
            if !first && !self.adjacent() {
                break;
            }
            match self.peek() {
                Tok::Ident(w) => {
                    let w = w.clone();
                    self.advance();
                    push_text(&mut frags, &w);
                }
                Tok::Int(v) => {
                    let v = *v;
                    self.advance();
                    push_text(&mut frags, &v.to_string());
                }
                Tok::Dash => {
                    self.advance();
                    push_text(&mut frags, "-");
                }
                Tok::LBrace => {
                    self.advance();
                    let var = match self.peek() {
                        Tok::Ident(w) => w.clone(),
                        _ => return Err(Diagnostic::error(self.pos(), "expected variable name in '{...}'")),
                    };
                    self.advance();
                    self.expect(Tok::RBrace, "'}'")?;
                    frags.push(Frag::Var(var));
                }
                _ => break,
            }
            first = false;
        }
        if frags.is_empty() {
            return Err(Diagnostic::error(pos, "expected a name"));
        }
        Ok(Name { frags, pos })
    }

    /// An optionally signed integer literal.
    fn signed_int(&mut self) -> PResult<i64> {
        let neg = self.eat(&Tok::Dash);
        match self.peek() {
            Tok::Int(v) => {
                let v = *v;
                self.advance();
                Ok(if neg { -v } else { v })
            }
            _ => Err(Diagnostic::error(self.pos(), "expected an integer")),
        }
    }

    /// Tag list inside brackets: `[t1, t2]`.
    fn tag_list(&mut self) -> PResult<Vec<Name>> {
        self.expect(Tok::LBracket, "'['")?;
        let mut tags = vec![self.name()?];
        while self.eat(&Tok::Comma) {
            tags.push(self.name()?);
        }
        self.expect(Tok::RBracket, "']'")?;
        Ok(tags)
    }

    /// Parenthesized tag set: `(t1, t2)`.
    fn paren_tags(&mut self) -> PResult<Vec<Name>> {
        self.expect(Tok::LParen, "'('")?;
        let mut tags = vec![self.name()?];
        while self.eat(&Tok::Comma) {
            tags.push(self.name()?);
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(tags)
    }

    /// Name-plus-optional-adjacent-tags item for players/values/decisions/
    /// outcomes lists.
    fn tagged_item(&mut self) -> PResult<(Name, Vec<Name>)> {
        let name = self.name()?;
        let tags = if *self.peek() == Tok::LBracket && self.adjacent() {
            self.tag_list()?
        } else {
            Vec::new()
        };
        Ok((name, tags))
    }

    // ------------------------------------------------------------------
    // Terms (coordinate arithmetic)
    // ------------------------------------------------------------------

    fn term(&mut self) -> PResult<Term> {
        let mut lhs = self.term_factor()?;
        loop {
            if self.eat(&Tok::Plus) {
                let rhs = self.term_factor()?;
                lhs = Term::Add(Box::new(lhs), Box::new(rhs));
            } else if *self.peek() == Tok::Dash {
                // A dash could start a negative literal in a name position;
                // here it is always subtraction.
                self.advance();
                let rhs = self.term_factor()?;
                lhs = Term::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    fn term_factor(&mut self) -> PResult<Term> {
        match self.peek() {
            Tok::Dash => {
                self.advance();
                Ok(Term::Neg(Box::new(self.term_factor()?)))
            }
            Tok::Int(v) => {
                let v = *v;
                self.advance();
                Ok(Term::Int(v))
            }
            Tok::LParen => {
                self.advance();
                let t = self.term()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(t)
            }
            Tok::Ident(w) if w == "v" && self.peek2() == Some(&Tok::LParen) => {
                self.advance();
                self.advance();
                let t = self.name()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Term::ValueOf(t))
            }
            Tok::Ident(w) if w == "phi" && self.peek2() == Some(&Tok::LParen) => {
                self.advance();
                self.advance();
                let t = self.name()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Term::TrackCoordOf(t))
            }
            Tok::Ident(_) | Tok::Quoted(_) | Tok::LBrace => Ok(Term::Sym(self.name()?)),
            _ => Err(Diagnostic::error(self.pos(), "expected a term")),
        }
    }

    fn cmp_op(&mut self) -> PResult<CmpOp> {
        let op = match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return Err(Diagnostic::error(self.pos(), "expected a comparison operator")),
        };
        self.advance();
        Ok(op)
    }

    /// Optional `@k` coordinate index selector.
    fn coord_index(&mut self) -> PResult<Option<u32>> {
        if self.eat(&Tok::At) {
            match self.peek() {
                Tok::Int(v) if *v >= 1 => {
                    let v = *v as u32;
                    self.advance();
                    Ok(Some(v))
                }
                _ => Err(Diagnostic::error(self.pos(), "expected a coordinate index after '@'")),
            }
        } else {
            Ok(None)
        }
    }

    // ------------------------------------------------------------------
    // Slices
    // ------------------------------------------------------------------

    fn slice(&mut self) -> PResult<RawSlice> {
        let mut parts = vec![self.slice_and()?];
        while self.eat(&Tok::Pipe) {
            parts.push(self.slice_and()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { RawSlice::Or(parts) })
    }

    fn slice_and(&mut self) -> PResult<RawSlice> {
        let mut parts = vec![self.slice_unary()?];
        while self.eat(&Tok::Amp) {
            parts.push(self.slice_unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { RawSlice::And(parts) })
    }

    fn slice_unary(&mut self) -> PResult<RawSlice> {
        if self.eat(&Tok::Bang) {
            return Ok(RawSlice::Not(Box::new(self.slice_unary()?)));
        }
        self.slice_primary()
    }

    fn slice_primary(&mut self) -> PResult<RawSlice> {
        let pos = self.pos();
        match self.peek() {
            Tok::Ident(w) if w == "all" => {
                self.advance();
                Ok(RawSlice::All)
            }
            Tok::Ident(w) if w == "empty" || w == "none" => {
                self.advance();
                Ok(RawSlice::Empty)
            }
            Tok::LBracket => {
                self.advance();
                let bracket = self.bracket_body()?;
                self.expect(Tok::RBracket, "']'")?;
                let index = self.coord_index()?;
                let bracket = match bracket {
                    RawBracket::Cmp { lhs, op, rhs, .. } => {
                        RawBracket::Cmp { lhs, op, rhs, coord_index: index }
                    }
                    m => m,
                };
                Ok(RawSlice::Bracket(bracket, pos))
            }
            Tok::LParen => {
                // Try the `(value)@target` atom first; fall back to grouping.
                let save = self.i;
                if let Ok(atom) = self.value_atom() {
                    return Ok(atom);
                }
                self.i = save;
                self.advance();
                let inner = self.slice()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Ident(_) | Tok::LBrace | Tok::Quoted(_) | Tok::Int(_) | Tok::Dash => {
                let name = self.name()?;
                if *self.peek() == Tok::LParen && self.adjacent() {
                    Ok(RawSlice::Call(self.call_args(name, pos)?))
                } else {
                    Err(Diagnostic::error(pos, "expected a slice"))
                }
            }
            _ => Err(Diagnostic::error(pos, "expected a slice")),
        }
    }

    fn value_atom(&mut self) -> PResult<RawSlice> {
        self.expect(Tok::LParen, "'('")?;
        let value = self.name()?;
        self.expect(Tok::RParen, "')'")?;
        self.expect(Tok::At, "'@'")?;
        if *self.peek() == Tok::LParen {
            let tags = self.paren_tags()?;
            Ok(RawSlice::TagProduct { value, tags })
        } else {
            let track = self.name()?;
            Ok(RawSlice::Is { value, track })
        }
    }

    fn bracket_body(&mut self) -> PResult<RawBracket> {
        let lhs = self.term()?;
        if self.eat_ident("in") {
            if *self.peek() == Tok::LBrace {
                self.advance();
                let mut values = vec![self.name()?];
                while self.eat(&Tok::Comma) {
                    values.push(self.name()?);
                }
                self.expect(Tok::RBrace, "'}'")?;
                return Ok(RawBracket::MembershipValues { subject: lhs, values });
            }
            let tags = self.paren_tags()?;
            return Ok(RawBracket::Membership { subject: lhs, tags });
        }
        let op = self.cmp_op()?;
        let rhs = self.term()?;
        Ok(RawBracket::Cmp { lhs, op, rhs, coord_index: None })
    }

    fn call_args(&mut self, name: Name, pos: Pos) -> PResult<RawCall> {
        self.expect(Tok::LParen, "'('")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.call_arg()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(RawCall { name, args, pos })
    }

    fn call_arg(&mut self) -> PResult<RawArg> {
        match self.peek() {
            Tok::LParen => Ok(RawArg::TagSet(self.paren_tags()?)),
            Tok::Int(v) => {
                let v = *v;
                self.advance();
                Ok(RawArg::Int(v))
            }
            Tok::Dash if matches!(self.peek2(), Some(Tok::Int(_))) => Ok(RawArg::Int(self.signed_int()?)),
            _ => Ok(RawArg::Name(self.name()?)),
        }
    }

    // ------------------------------------------------------------------
    // Declarations
    // ------------------------------------------------------------------

    fn end_decl(&mut self) -> PResult<()> {
        if self.at_end() || self.eat(&Tok::Newline) {
            Ok(())
        } else {
            Err(Diagnostic::error(self.pos(), "unexpected input at end of declaration"))
        }
    }

    fn decl(&mut self) -> PResult<Spanned> {
        let pos = self.pos();
        let head = match self.peek() {
            Tok::Ident(w) => w.clone(),
            _ => return Err(Diagnostic::error(pos, "expected a declaration")),
        };
        match head.as_str() {
            "memory" | "foresight" => {
                return Err(Diagnostic::error(
                    pos,
                    format!("'{head}' is reserved structured notation with no defined semantics"),
                ));
            }
            _ => {}
        }
        self.advance();
        let decl = match head.as_str() {
            "game" => {
                let name = self.name()?;
                self.end_decl()?;
                Decl::Game(name)
            }
            "players" => {
                let mut items = Vec::new();
                while *self.peek() != Tok::Newline {
                    items.push(self.tagged_item()?);
                }
                self.end_decl()?;
                Decl::Players(items)
            }
            "track" => self.track_decl()?,
            "init" => {
                let slice = self.slice()?;
                self.end_decl()?;
                Decl::Init(slice)
            }
            "decisions" => self.decisions_decl()?,
            "action" => self.action_decl()?,
            "consequence" => self.consequence_decl()?,
            "legal" => self.legal_decl()?,
            "ending" => {
                let slice = self.slice()?;
                self.end_decl()?;
                Decl::Ending(slice)
            }
            "outcomes" => {
                let mut items = Vec::new();
                while *self.peek() != Tok::Newline {
                    items.push(self.tagged_item()?);
                }
                self.end_decl()?;
                Decl::Outcomes(items)
            }
            "omega" => {
                let slice = if self.eat_ident("otherwise") { None } else { Some(self.slice()?) };
                self.expect(Tok::Arrow, "'->'")?;
                let outcome = self.name()?;
                self.end_decl()?;
                Decl::Omega { slice, outcome }
            }
            "ludemes" => {
                let mut names = Vec::new();
                while *self.peek() != Tok::Newline {
                    names.push(self.name()?);
                }
                self.end_decl()?;
                Decl::Ludemes(names)
            }
            "forall" => self.forall_decl()?,
            other => {
                return Err(Diagnostic::error(pos, format!("unknown declaration '{other}'"))
                    .with_symbol(other));
            }
        };
        Ok(Spanned { decl, pos })
    }

    fn track_decl(&mut self) -> PResult<Decl> {
        let name = self.name()?;
        let tags = if *self.peek() == Tok::LBracket { self.tag_list()? } else { Vec::new() };
        let coord = if self.eat(&Tok::At) {
            if *self.peek() == Tok::LParen {
                self.advance();
                let mut parts = vec![self.term()?];
                while self.eat(&Tok::Comma) {
                    parts.push(self.term()?);
                }
                self.expect(Tok::RParen, "')'")?;
                Some(RawTrackCoord::Lattice(parts))
            } else {
                Some(RawTrackCoord::Int(self.term()?))
            }
        } else {
            None
        };
        self.expect(Tok::Colon, "':'")?;
        let mut values = Vec::new();
        while !matches!(self.peek(), Tok::Newline | Tok::Tilde) {
            if *self.peek() == Tok::LBracket {
                self.advance();
                let a = self.signed_int()?;
                self.expect(Tok::Comma, "','")?;
                let b = self.signed_int()?;
                self.expect(Tok::RBracket, "']'")?;
                values.push(RawValueItem::Interval(a, b));
            } else {
                let name = self.name()?;
                let tags = if *self.peek() == Tok::LBracket && self.adjacent() {
                    self.tag_list()?
                } else {
                    Vec::new()
                };
                values.push(RawValueItem::Named { name, tags });
            }
        }
        let coord_specs = self.coord_specs()?;
        self.end_decl()?;
        Ok(Decl::Track { name, tags, coord, values, coord_specs })
    }

    fn coord_specs(&mut self) -> PResult<Vec<RawCoordSpec>> {
        if !self.eat(&Tok::Tilde) {
            return Ok(Vec::new());
        }
        let mut specs = Vec::new();
        loop {
            let spec = if self.eat_ident("mod") {
                match self.peek() {
                    Tok::Int(m) if *m >= 1 => {
                        let m = *m as u64;
                        self.advance();
                        RawCoordSpec::Mod(m)
                    }
                    _ => return Err(Diagnostic::error(self.pos(), "expected a modulus after 'mod'")),
                }
            } else if *self.peek() == Tok::LBracket {
                self.advance();
                let a = self.signed_int()?;
                self.expect(Tok::Comma, "','")?;
                let b = self.signed_int()?;
                self.expect(Tok::RBracket, "']'")?;
                RawCoordSpec::Interval(a, b)
            } else if self.eat_ident("ints") {
                let mut ints = Vec::new();
                while matches!(self.peek(), Tok::Int(_) | Tok::Dash) {
                    ints.push(self.signed_int()?);
                }
                RawCoordSpec::Ints(ints)
            } else if self.eat_ident("lats") {
                let mut points = Vec::new();
                while *self.peek() == Tok::LParen {
                    self.advance();
                    let mut p = vec![self.signed_int()?];
                    while self.eat(&Tok::Comma) {
                        p.push(self.signed_int()?);
                    }
                    self.expect(Tok::RParen, "')'")?;
                    points.push(p);
                }
                RawCoordSpec::Lattice(points)
            } else {
                return Err(Diagnostic::error(
                    self.pos(),
                    "expected a coordinate spec: 'mod m', '[a,b]', 'ints ...', or 'lats ...'",
                ));
            };
            specs.push(spec);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(specs)
    }

    fn decisions_decl(&mut self) -> PResult<Decl> {
        if self.eat(&Tok::Tilde) {
            if !self.eat_ident("actions") {
                return Err(Diagnostic::error(self.pos(), "expected 'actions' after '~'"));
            }
            self.end_decl()?;
            return Ok(Decl::DecisionsFromActions);
        }
        let mut items = Vec::new();
        while !matches!(self.peek(), Tok::Newline | Tok::Tilde) {
            items.push(self.tagged_item()?);
        }
        let coord_specs = self.coord_specs()?;
        self.end_decl()?;
        Ok(Decl::Decisions { items, coord_specs })
    }

    fn action_decl(&mut self) -> PResult<Decl> {
        let name = self.name()?;
        let tags = if *self.peek() == Tok::LBracket { self.tag_list()? } else { Vec::new() };
        let mut clauses = Vec::new();
        if self.eat(&Tok::Colon) {
            loop {
                let guard = self.slice()?;
                self.expect(Tok::Arrow, "'->'")?;
                let mut writes = vec![self.write()?];
                while self.eat(&Tok::Comma) {
                    writes.push(self.write()?);
                }
                clauses.push(RawClause { guard, writes });
                if !self.eat(&Tok::DoubleColon) {
                    break;
                }
            }
        }
        self.end_decl()?;
        Ok(Decl::Action { name, tags, clauses })
    }

    fn write(&mut self) -> PResult<RawWrite> {
        let track = self.name()?;
        self.expect(Tok::Eq, "'='")?;
        let rhs = match self.peek() {
            Tok::Plus => {
                self.advance();
                let k = match self.peek() {
                    Tok::Int(v) => {
                        let v = *v;
                        self.advance();
                        v
                    }
                    _ => return Err(Diagnostic::error(self.pos(), "expected an integer after '+'")),
                };
                RawWriteRhs::Shift { delta: k, coord_index: self.coord_index()? }
            }
            Tok::Dash if matches!(self.peek2(), Some(Tok::Int(_))) => {
                self.advance();
                let k = match self.peek() {
                    Tok::Int(v) => {
                        let v = *v;
                        self.advance();
                        v
                    }
                    _ => unreachable!(),
                };
                RawWriteRhs::Shift { delta: -k, coord_index: self.coord_index()? }
            }
            Tok::LBracket => {
                self.advance();
                let term = self.term()?;
                self.expect(Tok::RBracket, "']'")?;
                RawWriteRhs::Expr { term, coord_index: self.coord_index()? }
            }
            _ => RawWriteRhs::Value(self.name()?),
        };
        Ok(RawWrite { track, rhs })
    }

    fn consequence_decl(&mut self) -> PResult<Decl> {
        self.expect(Tok::LParen, "'('")?;
        let mut pattern = vec![self.decision_pat()?];
        while self.eat(&Tok::Comma) {
            pattern.push(self.decision_pat()?);
        }
        self.expect(Tok::RParen, "')'")?;
        let guard = if self.eat_ident("if") { Some(self.slice()?) } else { None };
        self.expect(Tok::Colon, "':'")?;
        let mut branches = vec![self.branch()?];
        while self.eat(&Tok::Semi) {
            branches.push(self.branch()?);
        }
        self.end_decl()?;
        Ok(Decl::Consequence { pattern, guard, branches })
    }

    fn decision_pat(&mut self) -> PResult<RawDecisionPat> {
        match self.peek() {
            Tok::Star => {
                self.advance();
                Ok(RawDecisionPat::Any)
            }
            Tok::Int(0) => {
                self.advance();
                Ok(RawDecisionPat::Null)
            }
            Tok::LParen => Ok(RawDecisionPat::Tagged(self.paren_tags()?)),
            _ => Ok(RawDecisionPat::Named(self.name()?)),
        }
    }

    fn branch(&mut self) -> PResult<(Prob, Vec<RawActionRef>)> {
        let num = self.signed_int()?;
        let prob = if self.eat(&Tok::Slash) {
            let den = self.signed_int()?;
            if den == 0 {
                return Err(Diagnostic::error(self.pos(), "probability denominator is zero"));
            }
            Prob::new(BigInt::from(num), BigInt::from(den))
        } else {
            Prob::from_integer(BigInt::from(num))
        };
        let mut actions = Vec::new();
        loop {
            match self.peek() {
                Tok::Semi | Tok::Newline => break,
                _ => {
                    let pos = self.pos();
                    let name = self.name()?;
                    if *self.peek() == Tok::LParen && self.adjacent() {
                        actions.push(RawActionRef::Call(self.call_args(name, pos)?));
                    } else {
                        actions.push(RawActionRef::Named(name));
                    }
                }
            }
        }
        if actions.is_empty() {
            return Err(Diagnostic::error(self.pos(), "consequence branch names no action"));
        }
        Ok((prob, actions))
    }

    fn legal_decl(&mut self) -> PResult<Decl> {
        if self.eat_ident("otherwise") {
            self.expect(Tok::Colon, "':'")?;
            let slice = self.slice()?;
            self.end_decl()?;
            return Ok(Decl::Legal {
                player: RawPlayerPat::Any,
                decision: RawDecisionPat::Any,
                slice,
                otherwise: true,
            });
        }
        let player = if self.eat(&Tok::Star) {
            RawPlayerPat::Any
        } else {
            RawPlayerPat::Named(self.name()?)
        };
        let decision = match self.peek() {
            Tok::Star => {
                self.advance();
                RawDecisionPat::Any
            }
            Tok::LParen => RawDecisionPat::Tagged(self.paren_tags()?),
            _ => RawDecisionPat::Named(self.name()?),
        };
        self.expect(Tok::Colon, "':'")?;
        let slice = self.slice()?;
        self.end_decl()?;
        Ok(Decl::Legal { player, decision, slice, otherwise: false })
    }

    fn forall_decl(&mut self) -> PResult<Decl> {
        let mut binders = Vec::new();
        loop {
            let pos = self.pos();
            let var = match self.peek() {
                Tok::Ident(w) => w.clone(),
                _ => return Err(Diagnostic::error(pos, "expected a binder variable")),
            };
            self.advance();
            if !self.eat_ident("in") {
                return Err(Diagnostic::error(self.pos(), "expected 'in'"));
            }
            let set = self.set_expr()?;
            binders.push(RawBinder { var, set, pos });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        let mut conds = Vec::new();
        if self.eat_ident("where") {
            loop {
                let lhs = self.term()?;
                let negated = match self.peek() {
                    Tok::Eq => false,
                    Tok::Ne => true,
                    _ => {
                        return Err(Diagnostic::error(
                            self.pos(),
                            "expected '=' or '!=' in where condition",
                        ))
                    }
                };
                self.advance();
                let rhs = self.term()?;
                conds.push(RawCond { lhs, negated, rhs });
                if !self.eat(&Tok::Amp) {
                    break;
                }
            }
        }
        self.expect(Tok::Colon, "':'")?;
        let body = self.decl()?;
        Ok(Decl::Forall { binders, conds, body: Box::new(body) })
    }

    fn set_expr(&mut self) -> PResult<RawSetExpr> {
        match self.peek() {
            Tok::Ident(w) if w == "players" => {
                self.advance();
                Ok(RawSetExpr::Players)
            }
            Tok::Ident(w) if w == "decisions" => {
                self.advance();
                Ok(RawSetExpr::Decisions)
            }
            Tok::LBrace => {
                self.advance();
                let mut names = vec![self.name()?];
                while self.eat(&Tok::Comma) {
                    names.push(self.name()?);
                }
                self.expect(Tok::RBrace, "'}'")?;
                Ok(RawSetExpr::Names(names))
            }
            Tok::LParen => Ok(RawSetExpr::TrackTags(self.paren_tags()?)),
            Tok::Int(_) | Tok::Dash => {
                let a = self.signed_int()?;
                self.expect(Tok::DotDot, "'..'")?;
                let b = self.signed_int()?;
                Ok(RawSetExpr::Range(a, b))
            }
            _ => Err(Diagnostic::error(
                self.pos(),
                "expected a set: a..b, {names}, (tags), players, or decisions",
            )),
        }
    }
}

fn section_of(decl: &Decl) -> Option<Section> {
    match decl {
        Decl::Game(_) => Some(Section::Game),
        Decl::Players(_) => Some(Section::Players),
        Decl::Track { .. } => Some(Section::Tracks),
        Decl::Init(_) => Some(Section::Init),
        Decl::DecisionsFromActions | Decl::Decisions { .. } => Some(Section::Decisions),
        Decl::Action { .. } => Some(Section::Actions),
        Decl::Consequence { .. } => Some(Section::Consequences),
        Decl::Legal { .. } => Some(Section::Legality),
        Decl::Ending(_) => Some(Section::Ending),
        Decl::Outcomes(_) => Some(Section::Outcomes),
        Decl::Omega { .. } => Some(Section::OutcomeRules),
        Decl::Ludemes(_) => Some(Section::CatalogImports),
        Decl::Forall { body, .. } => section_of(&body.decl),
    }
}

/// Parses a token stream into declarations, recovering at line boundaries so
/// multiple diagnostics can be reported in one pass.
pub fn parse_decls(tokens: &[Token]) -> (Vec<Spanned>, Vec<(Section, usize)>, Vec<Diagnostic>) {
    let mut cur = Cursor { toks: tokens, i: 0 };
    let mut decls = Vec::new();
    let mut diags = Vec::new();
    let mut sections: Vec<(Section, usize)> = Vec::new();
    while !cur.at_end() {
        if cur.eat(&Tok::Newline) {
            continue;
        }
        match cur.decl() {
            Ok(spanned) => {
                if let Some(sec) = section_of(&spanned.decl) {
                    if sections.last().map(|(s, _)| *s) != Some(sec) {
                        sections.push((sec, spanned.pos.line));
                    }
                }
                decls.push(spanned);
            }
            Err(d) => {
                diags.push(d);
                cur.skip_to_newline();
            }
        }
    }
    (decls, sections, diags)
}
