//! Greedy delta debugging of failing traces.

use thiserror::Error;

use super::{replay, GameTrace, TraceHeader};
use crate::game::Move;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MinimizeError {
    #[error("trace does not end in a violation")]
    NoViolation,
    #[error("violation {0} does not reproduce on replay")]
    CannotReproduce(String),
}

/// Moves up to the first step failing `target`, if any.
fn failing_prefix(header: &TraceHeader, moves: &[Move], target: &str) -> Option<usize> {
    let trace = replay(header, moves).ok()?;
    trace
        .reports
        .iter()
        .position(|r| r.checks.violations.iter().any(|v| v == target))
        .map(|i| i + 1)
}

/// Shrinks a failing trace to a locally minimal one that still fails the
/// same check as the original's first violation.
pub fn minimize_trace(t: &GameTrace) -> Result<GameTrace, MinimizeError> {
    let (_, checks) = t.first_violation().ok_or(MinimizeError::NoViolation)?;
    let target = checks[0].clone();
    let header = &t.header;
    let mut moves = t.moves();
    let len = failing_prefix(header, &moves, &target)
        .ok_or_else(|| MinimizeError::CannotReproduce(target.clone()))?;
    moves.truncate(len);

    let mut chunk = (moves.len() / 2).max(1);
    loop {
        let mut changed = false;
        let mut start = 0;
        while start < moves.len() {
            let end = (start + chunk).min(moves.len());
            let mut candidate = moves[..start].to_vec();
            candidate.extend_from_slice(&moves[end..]);
            match failing_prefix(header, &candidate, &target) {
                Some(n) => {
                    candidate.truncate(n);
                    moves = candidate;
                    changed = true;
                }
                None => start += chunk,
            }
        }
        if chunk == 1 && !changed {
            break;
        }
        if !changed {
            chunk = (chunk / 2).max(1);
        }
    }

    replay(header, &moves).map_err(|_| MinimizeError::CannotReproduce(target))
}
