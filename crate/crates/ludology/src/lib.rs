//! Game systems below the information and interface layers: a compact
//! description language, legal play, game trees and automata, and
//! equivalence of systems up to relabeling and agency.
//!
//! The crate is organized around the life of a description:
//!
//! - [`parse`] turns description text into a validated [`model::GameSystem`]
//!   (and back, via a canonical serializer and a JSON dump).
//! - [`ludeme`] is the catalog of reusable description fragments (ludemic
//!   functions) that descriptions may invoke.
//! - [`play`] executes the gameplay loop with pluggable deciders and
//!   validates recorded trajectories.
//! - [`tree`] builds game trees and the finite game automaton, extracts
//!   decision matrices, and exports DOT/JSON.
//! - [`equiv`] decides structural equivalence, equivalence up to relabeling,
//!   and agency equivalence via the four tree reductions.

pub mod corpus;
pub mod ids;
pub mod ludeme;
pub mod model;
pub mod parse;
pub mod rational;

pub use ids::{ActionId, DecisionId, OutcomeId, PlayerId, TrackId, ValueId, D0};
pub use model::{GameState, GameSystem, Slice};
pub use parse::{parse_system, serialize_system, Diagnostic};
pub use rational::{format_prob, parse_prob, prob, Prob};
