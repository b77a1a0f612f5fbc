//! Game states and state-space enumeration.

use serde::{Deserialize, Serialize};

use crate::ids::{TrackId, ValueId};

/// A total assignment of one value to every track, stored index-aligned with
/// the system's track list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GameState {
    values: Vec<ValueId>,
}

impl GameState {
    pub fn new(values: Vec<ValueId>) -> Self {
        GameState { values }
    }

    pub fn value(&self, track: TrackId) -> ValueId {
        self.values[track.0]
    }

    pub fn set(&mut self, track: TrackId, value: ValueId) {
        self.values[track.0] = value;
    }

    pub fn values(&self) -> &[ValueId] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Iterates the full product space of the given per-track value counts in
/// lexicographic order. The caller is responsible for capping.
pub struct StateSpaceIter {
    sizes: Vec<usize>,
    current: Option<Vec<ValueId>>,
}

impl StateSpaceIter {
    pub fn new(sizes: Vec<usize>) -> Self {
        let current = if sizes.iter().any(|&n| n == 0) {
            None
        } else {
            Some(vec![ValueId(0); sizes.len()])
        };
        StateSpaceIter { sizes, current }
    }
}

impl Iterator for StateSpaceIter {
    type Item = GameState;

    fn next(&mut self) -> Option<GameState> {
        let current = self.current.as_mut()?;
        let out = GameState::new(current.clone());
        // Odometer increment, most significant digit first.
        let mut i = current.len();
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if current[i].0 + 1 < self.sizes[i] {
                current[i].0 += 1;
                for slot in current[i + 1..].iter_mut() {
                    slot.0 = 0;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Product-space size, saturating at `u64::MAX` on overflow.
pub fn space_size(sizes: &[usize]) -> u64 {
    let mut total: u64 = 1;
    for &n in sizes {
        total = total.saturating_mul(n as u64);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_product_space() {
        let all: Vec<_> = StateSpaceIter::new(vec![2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0].values(), &[ValueId(0), ValueId(0)]);
        assert_eq!(all[5].values(), &[ValueId(1), ValueId(2)]);
        let distinct: std::collections::HashSet<_> = all.iter().cloned().collect();
        assert_eq!(distinct.len(), 6);
    }

    #[test]
    fn empty_track_yields_nothing() {
        assert_eq!(StateSpaceIter::new(vec![2, 0]).count(), 0);
    }

    #[test]
    fn sizes() {
        assert_eq!(space_size(&[5, 5, 5, 5, 2]), 1250);
        assert_eq!(space_size(&[3; 9]), 19683);
    }
}
