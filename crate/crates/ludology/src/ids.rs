//! Index newtypes for the components of a game system.
//!
//! All system elements live in vectors owned by [`crate::model::GameSystem`];
//! these ids are plain indices into those vectors.

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl From<usize> for $name {
            fn from(i: usize) -> Self {
                Self(i)
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Index into the player list.
    PlayerId
);
id_type!(
    /// Index into the track list.
    TrackId
);
id_type!(
    /// Index into a track's value list.
    ValueId
);
id_type!(
    /// Index into the decision set.
    DecisionId
);
id_type!(
    /// Index into the action set.
    ActionId
);
id_type!(
    /// Index into the outcome set.
    OutcomeId
);

/// One slot of a decision tuple: a decision, or the null decision.
///
/// The null decision is a reserved sentinel outside the decision set; it is
/// assigned automatically to a player whose legal set is empty.
pub type D0 = Option<DecisionId>;
