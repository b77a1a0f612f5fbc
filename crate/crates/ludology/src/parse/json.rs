//! JSON dump of a parsed system, for interop. Field order is struct order
//! and therefore stable; rationals print as `num/den` strings.

use crate::model::builder::validate_system;
use crate::model::GameSystem;

pub fn system_to_json(sys: &GameSystem) -> String {
    serde_json::to_string_pretty(sys).expect("system serializes")
}

/// Reads a system back from its JSON dump, re-running validation and table
/// compilation.
pub fn system_from_json(text: &str) -> Result<GameSystem, String> {
    let mut sys: GameSystem = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let defects = validate_system(&sys);
    if let Some(first) = defects.first() {
        return Err(format!("invalid system: {first}"));
    }
    sys.finalize();
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_system;

    #[test]
    fn json_round_trip_preserves_structure() {
        let sys = parse_system(crate::corpus::COIN_FLIP).unwrap();
        let json = system_to_json(&sys);
        let back = system_from_json(&json).unwrap();
        assert_eq!(sys, back);
        assert!(json.contains("\"1/2\""));
    }
}
