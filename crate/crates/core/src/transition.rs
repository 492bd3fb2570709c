use serde::{Deserialize, Serialize};

/// One experience record `(s, a, r, s', terminal)` stamped with the global
/// step counter at which it was stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    pub stored_at: u64,
}

impl Transition {
    pub fn dim(&self) -> usize {
        self.state.len()
    }
}
