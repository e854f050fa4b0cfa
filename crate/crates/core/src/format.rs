//! JSON model files.
//!
//! ```json
//! {
//!   "states": ["a", "b"],
//!   "events": ["x", "y"],
//!   "transitions": [{"from": "a", "event": "x", "to": "b", "prob": 1.0}, ...],
//!   "chi": {"a": -0.5, "b": 1.0},
//!   "controllable": [["a", "x"]],
//!   "unobservable": []
//! }
//! ```
//!
//! Declaration order of `states` and `events` fixes every index. Unknown keys
//! and duplicate `(from, event)` entries are rejected. States missing from
//! `chi` get zero.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Pfsa;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub from: String,
    pub event: String,
    pub to: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub states: Vec<String>,
    pub events: Vec<String>,
    pub transitions: Vec<TransitionEntry>,
    #[serde(default)]
    pub chi: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub controllable: Vec<(String, String)>,
    #[serde(default)]
    pub unobservable: Vec<(String, String)>,
}

fn duplicates(names: &[String]) -> Option<&String> {
    let mut seen = HashSet::new();
    names.iter().find(|n| !seen.insert(n.as_str()))
}

impl ModelFile {
    /// Structural conversion. Unknown names and duplicates are format errors;
    /// numeric invariants are left to [`Pfsa::validate`].
    pub fn to_pfsa(&self) -> Result<Pfsa> {
        if let Some(d) = duplicates(&self.states) {
            return Err(Error::Format(format!("duplicate state `{d}`")));
        }
        if let Some(d) = duplicates(&self.events) {
            return Err(Error::Format(format!("duplicate event `{d}`")));
        }
        let mut g = Pfsa::new(self.states.clone(), self.events.clone());
        let state = |n: &str| g.state_index(n).map_err(|_| Error::Format(format!("unknown state `{n}`")));
        let event = |n: &str| g.event_index(n).map_err(|_| Error::Format(format!("unknown event `{n}`")));

        let mut cells = Vec::with_capacity(self.transitions.len());
        let mut seen = HashSet::new();
        for t in &self.transitions {
            let (q, s, to) = (state(&t.from)?, event(&t.event)?, state(&t.to)?);
            if !seen.insert((q, s)) {
                return Err(Error::Format(format!("duplicate transition ({}, {})", t.from, t.event)));
            }
            cells.push((q, s, to, t.prob));
        }
        let mut chi = Vec::new();
        for (name, v) in &self.chi {
            let q = state(name)?;
            let x = v.as_f64().ok_or_else(|| Error::Format(format!("chi for `{name}` is not a number")))?;
            chi.push((q, x));
        }
        let mut flags = Vec::new();
        for (list, unobs) in [(&self.controllable, false), (&self.unobservable, true)] {
            for (qn, sn) in list {
                flags.push((state(qn)?, event(sn)?, unobs));
            }
        }

        for (q, s, to, p) in cells {
            g.set_transition(q, s, to, p);
        }
        for (q, x) in chi {
            g.set_chi(q, x);
        }
        for (q, s, unobs) in flags {
            if unobs {
                g.set_unobservable(q, s, true);
            } else {
                g.set_controllable(q, s, true);
            }
        }
        Ok(g)
    }

    pub fn from_pfsa(g: &Pfsa) -> Self {
        let name = |q: usize| g.state_name(q).to_string();
        let ev = |s: usize| g.event_name(s).to_string();
        ModelFile {
            states: g.states().to_vec(),
            events: g.events().to_vec(),
            transitions: g
                .transitions()
                .map(|(q, s, to, prob)| TransitionEntry { from: name(q), event: ev(s), to: name(to), prob })
                .collect(),
            chi: g.chi().iter().enumerate().map(|(q, &x)| (name(q), serde_json::Value::from(x))).collect(),
            controllable: g.controllable_pairs().into_iter().map(|(q, s)| (name(q), ev(s))).collect(),
            unobservable: g.unobservable_pairs().into_iter().map(|(q, s)| (name(q), ev(s))).collect(),
        }
    }
}

/// Parses a model document. Syntax errors carry line and column.
pub fn parse_model(text: &str) -> Result<Pfsa> {
    let file: ModelFile = serde_json::from_str(text)?;
    file.to_pfsa()
}

/// Pretty-printed JSON for `g`.
pub fn serialize_model(g: &Pfsa) -> String {
    let mut out = serde_json::to_string_pretty(&ModelFile::from_pfsa(g)).expect("model serializes");
    out.push('\n');
    out
}
