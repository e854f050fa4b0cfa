//! Bundled example plants.

use crate::format::parse_model;
use crate::model::Pfsa;

pub const MISSION: &str = include_str!("../fixtures/mission.model");
pub const TIGER: &str = include_str!("../fixtures/tiger.model");
pub const MODEL1: &str = include_str!("../fixtures/model1.model");
pub const MODEL2: &str = include_str!("../fixtures/model2.model");
pub const FOURSTATE: &str = include_str!("../fixtures/fourstate.model");

fn load(text: &str) -> Pfsa {
    parse_model(text).expect("bundled fixture parses")
}

/// Four-state mission plant: G(ood), M(ission), E(rror), C(ritical).
pub fn mission() -> Pfsa {
    load(MISSION)
}

/// Seven-state tiger problem with listen / choose / reset events.
pub fn tiger() -> Pfsa {
    load(TIGER)
}

/// Four-state plant with unobservable `e` from `00`, all observable
/// transitions controllable.
pub fn model1() -> Pfsa {
    load(MODEL1)
}

/// Model 1 with small `a` self-loops added at `00` and `11`.
pub fn model2() -> Pfsa {
    load(MODEL2)
}

/// Model 1 dynamics without controllable transitions.
pub fn four_state() -> Pfsa {
    load(FOURSTATE)
}

/// Every bundled fixture, by file stem.
pub fn all() -> Vec<(&'static str, Pfsa)> {
    vec![
        ("mission", mission()),
        ("tiger", tiger()),
        ("model1", model1()),
        ("model2", model2()),
        ("fourstate", four_state()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_validate() {
        for (name, g) in all() {
            assert!(g.validate().is_empty(), "{name}: {:?}", g.validate());
        }
    }
}
