//! Rollout trace I/O.
//!
//! Augmented rollout dumps have one tab-separated line per step:
//! step index, environment state components, monitor state id, register
//! values, chosen transition id, environment action components. Each line
//! describes the augmented state at time t and the augmented action taken
//! from it.
//!
//! State traces (input to `eval`) are one environment state per line,
//! tab- or space-separated components, `#` comments allowed.

use std::io::{self, Write};

use thiserror::Error;

use crate::augmented::AugmentedRollout;

pub fn write_augmented_trace<W: Write>(w: &mut W, rollout: &AugmentedRollout) -> io::Result<()> {
    for (t, action) in rollout.actions.iter().enumerate() {
        let s = &rollout.states[t];
        write!(w, "{t}")?;
        for x in &s.env_state {
            write!(w, "\t{x}")?;
        }
        write!(w, "\t{}", s.monitor_state.0)?;
        for v in &s.valuation {
            write!(w, "\t{v}")?;
        }
        write!(w, "\t{}", action.transition.0)?;
        for a in &action.env_action {
            write!(w, "\t{a}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: bad number `{token}`")]
    BadNumber { line: usize, token: String },
    #[error("line {line}: state has {got} components, expected {expected}")]
    RaggedRow {
        line: usize,
        got: usize,
        expected: usize,
    },
    #[error("trace contains no states")]
    Empty,
}

/// Parse a states-only trace: one state per line.
pub fn parse_states_trace(text: &str) -> Result<Vec<Vec<f64>>, TraceError> {
    let mut states: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let stripped = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if stripped.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for token in stripped.split_whitespace() {
            let x: f64 = token.parse().map_err(|_| TraceError::BadNumber {
                line,
                token: token.to_string(),
            })?;
            row.push(x);
        }
        if let Some(first) = states.first() {
            if row.len() != first.len() {
                return Err(TraceError::RaggedRow {
                    line,
                    got: row.len(),
                    expected: first.len(),
                });
            }
        }
        states.push(row);
    }
    if states.is_empty() {
        return Err(TraceError::Empty);
    }
    Ok(states)
}
