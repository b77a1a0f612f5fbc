//! The textual description language: parsing, expansion, canonical
//! serialization, and the JSON system dump.
//!
//! A description is line-oriented. Sections mirror the setup / gameplay /
//! ending layout of a written game system:
//!
//! ```text
//! game coinflip
//! players P1 P2
//! track coin : - heads tails
//! init (-)@coin
//! decisions flip
//! action A_heads : (-)@coin -> coin = heads
//! action A_tails : (-)@coin -> coin = tails
//! consequence (flip, flip) : 1/2 A_heads ; 1/2 A_tails
//! legal * flip : (-)@coin
//! outcomes "P1 win" "P2 win"
//! omega (heads)@coin -> "P1 win"
//! omega (tails)@coin -> "P2 win"
//! ```
//!
//! Slices use `(value)@track` atoms, `!` for complement, `&` for products,
//! `|` for sums, and square-bracket Boolean calculations over coordinates.
//! `forall` comprehensions expand families of tracks, actions, and rules at
//! parse time. `decisions ~ actions` mirrors every action as a decision with
//! the trivial consequence function.

pub mod ast;
mod expand;
mod grammar;
pub mod json;
mod lexer;
mod serialize;

use serde::{Deserialize, Serialize};

use crate::ludeme::Catalog;
use crate::model::GameSystem;

pub use serialize::serialize_system;

/// A line/column position in the source text (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
}

/// A parse or validation message anchored to a source location.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub pos: Pos,
    pub message: String,
    /// The symbol the message is about, when there is one.
    pub symbol: Option<String>,
}

impl Diagnostic {
    pub fn error(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, pos, message: message.into(), symbol: None }
    }

    pub fn warning(pos: Pos, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, pos, message: message.into(), symbol: None }
    }

    pub fn with_symbol(mut self, symbol: impl Into<String>) -> Self {
        self.symbol = Some(symbol.into());
        self
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {}: {}", self.pos, sev, self.message)
    }
}

/// Which description section a line belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Section {
    Game,
    Players,
    Tracks,
    Init,
    Decisions,
    Actions,
    Consequences,
    Legality,
    Ending,
    Outcomes,
    OutcomeRules,
    CatalogImports,
}

/// Description text plus the section layout discovered while parsing.
#[derive(Debug, Clone)]
pub struct SourceDescription {
    pub text: String,
    /// `(section, first line)` in order of appearance.
    pub sections: Vec<(Section, usize)>,
}

/// Parses a description into a validated system using the built-in ludeme
/// catalog.
pub fn parse_system(text: &str) -> Result<GameSystem, Vec<Diagnostic>> {
    parse_system_with(text, &Catalog::builtin())
}

/// Parses a description against an explicit ludeme catalog.
pub fn parse_system_with(text: &str, catalog: &Catalog) -> Result<GameSystem, Vec<Diagnostic>> {
    let (system, _source, diagnostics) = parse_system_full(text, catalog);
    let errors: Vec<Diagnostic> =
        diagnostics.into_iter().filter(|d| d.severity == Severity::Error).collect();
    match system {
        Some(sys) if errors.is_empty() => Ok(sys),
        _ => Err(errors),
    }
}

/// Full-fidelity entry point: returns the system (if one could be built),
/// the section map, and every diagnostic including warnings.
pub fn parse_system_full(
    text: &str,
    catalog: &Catalog,
) -> (Option<GameSystem>, SourceDescription, Vec<Diagnostic>) {
    let mut diagnostics = Vec::new();
    let tokens = match lexer::lex(text) {
        Ok(t) => t,
        Err(d) => {
            diagnostics.push(d);
            return (
                None,
                SourceDescription { text: text.to_string(), sections: Vec::new() },
                diagnostics,
            );
        }
    };
    let (decls, sections, mut parse_diags) = grammar::parse_decls(&tokens);
    diagnostics.append(&mut parse_diags);
    let source = SourceDescription { text: text.to_string(), sections };
    if diagnostics.iter().any(|d| d.severity == Severity::Error) {
        return (None, source, diagnostics);
    }
    let (system, mut expand_diags) = expand::expand(&decls, catalog);
    diagnostics.append(&mut expand_diags);
    (system, source, diagnostics)
}
