//! Adversary strategies and game runners.

mod driver;
mod fuzz;
mod minimize;
mod scenarios;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::EvalValue;
use crate::game::{GameConfig, GameError, GameState, Move, StepReport};
use crate::gamma::ChannelState;
use crate::params::{Amount, Params, ParamsError, PartyId};

pub use fuzz::{fuzz, fuzz_game, FuzzConfig, FuzzReport, FuzzViolation, MoveKind};
pub use minimize::{minimize_trace, MinimizeError};
pub use scenarios::{builtin_scenario, AttackEntry, ATTACK_LIBRARY, BUILTIN_SCENARIOS};

/// Assertions checked on the final state of a scenario.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ExpectedFinal {
    pub honest_pkh: Option<Amount>,
    pub expected_funds: Option<EvalValue>,
    /// Final honest balance must cover `expectedFunds`.
    pub honest_covers_expected: bool,
    pub channel_closed: Option<bool>,
    /// The channel must be closed no later than `closeTime + closingTime`.
    pub closed_in_time: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub params: Params,
    pub honest: PartyId,
    #[serde(default)]
    pub config: GameConfig,
    pub moves: Vec<Move>,
    #[serde(default)]
    pub expected_final: Option<ExpectedFinal>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScenarioError {
    #[error(transparent)]
    InvalidParams(#[from] ParamsError),
    #[error("move {step} not applicable: {reason}")]
    MoveNotApplicable { step: usize, reason: String },
    #[error("assertion failed: {0}")]
    AssertionFailed(String),
    #[error("unknown builtin scenario {0}")]
    UnknownScenario(String),
    #[error("malformed input: {0}")]
    Parse(String),
}

impl From<GameError> for ScenarioError {
    fn from(e: GameError) -> Self {
        match e {
            GameError::InvalidParams(p) => ScenarioError::InvalidParams(p),
            GameError::NotApplicable(reason) => {
                ScenarioError::MoveNotApplicable { step: 0, reason }
            }
        }
    }
}

/// First line of a JSONL trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceHeader {
    pub name: String,
    pub params: Params,
    pub honest: PartyId,
    pub config: GameConfig,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: TraceHeader,
}

/// Summary of the last state of a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FinalState {
    pub honest_pkh: Amount,
    pub expected_funds: EvalValue,
    pub channel: ChannelState,
    pub now: u64,
    pub close_time: Option<u64>,
    /// Time of the first step after which the ledger channel was closed.
    pub closed_at: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameTrace {
    pub header: TraceHeader,
    pub reports: Vec<StepReport>,
    pub final_state: FinalState,
}

impl GameTrace {
    pub fn moves(&self) -> Vec<Move> {
        self.reports.iter().map(|r| r.mv.clone()).collect()
    }

    pub fn violation_count(&self) -> usize {
        self.reports.iter().filter(|r| !r.checks.ok).count()
    }

    pub fn is_clean(&self) -> bool {
        self.violation_count() == 0
    }

    /// Index and check ids of the first failing step.
    pub fn first_violation(&self) -> Option<(usize, &[String])> {
        self.reports
            .iter()
            .enumerate()
            .find(|(_, r)| !r.checks.ok)
            .map(|(i, r)| (i, r.checks.violations.as_slice()))
    }

    pub fn advisory_count(&self, id: &str) -> usize {
        self.reports
            .iter()
            .filter(|r| r.advisories.iter().any(|a| a == id))
            .count()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&HeaderLine {
            header: self.header.clone(),
        })
        .expect("header serializes");
        out.push('\n');
        for r in &self.reports {
            out.push_str(&serde_json::to_string(r).expect("report serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses a trace and re-executes its moves.
    pub fn from_jsonl(text: &str) -> Result<GameTrace, ScenarioError> {
        let (header, moves) = parse_jsonl(text)?;
        replay(&header, &moves)
    }
}

/// Header and moves of a JSONL trace, without re-execution.
pub fn parse_jsonl(text: &str) -> Result<(TraceHeader, Vec<Move>), ScenarioError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines
        .next()
        .ok_or_else(|| ScenarioError::Parse("empty trace".into()))?;
    let HeaderLine { header } =
        serde_json::from_str(first).map_err(|e| ScenarioError::Parse(format!("header: {e}")))?;
    let moves = lines
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str::<StepReport>(l)
                .map(|r| r.mv)
                .map_err(|e| ScenarioError::Parse(format!("line {}: {e}", i + 2)))
        })
        .collect::<Result<_, _>>()?;
    Ok((header, moves))
}

/// Runs `moves` from the initial state; stops at the first inapplicable move.
pub fn replay(header: &TraceHeader, moves: &[Move]) -> Result<GameTrace, ScenarioError> {
    let mut game = GameState::new(header.params.clone(), header.honest, header.config.clone())?;
    let mut reports = Vec::with_capacity(moves.len());
    let mut closed_at = None;
    for (step, m) in moves.iter().enumerate() {
        let (next, report) = game.apply_move(m).map_err(|e| match e {
            GameError::NotApplicable(reason) => ScenarioError::MoveNotApplicable { step, reason },
            other => other.into(),
        })?;
        game = next;
        if closed_at.is_none() && game.gamma.channel == ChannelState::Closed {
            closed_at = Some(game.now);
        }
        reports.push(report);
    }
    Ok(GameTrace {
        header: header.clone(),
        reports,
        final_state: final_state(&game, closed_at),
    })
}

fn final_state(game: &GameState, closed_at: Option<u64>) -> FinalState {
    FinalState {
        honest_pkh: game.gamma.pkh[game.honest],
        expected_funds: game.expected_funds,
        channel: game.gamma.channel,
        now: game.now,
        close_time: game.close_time,
        closed_at,
    }
}

impl Scenario {
    pub fn header(&self) -> TraceHeader {
        TraceHeader {
            name: self.name.clone(),
            params: self.params.clone(),
            honest: self.honest,
            config: self.config.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Replays a scenario and checks its final-state assertions.
pub fn run_scenario(s: &Scenario) -> Result<GameTrace, ScenarioError> {
    s.params.clone().validate()?;
    let trace = replay(&s.header(), &s.moves)?;
    if let Some(exp) = &s.expected_final {
        check_final(exp, &trace.final_state, &s.params)?;
    }
    Ok(trace)
}

fn check_final(exp: &ExpectedFinal, f: &FinalState, params: &Params) -> Result<(), ScenarioError> {
    let fail = |what: String| Err(ScenarioError::AssertionFailed(what));
    if let Some(want) = exp.honest_pkh {
        if f.honest_pkh != want {
            return fail(format!("honestPkh: got {}, want {want}", f.honest_pkh));
        }
    }
    if let Some(want) = exp.expected_funds {
        if f.expected_funds != want {
            return fail(format!(
                "expectedFunds: got {}, want {want}",
                f.expected_funds
            ));
        }
    }
    if exp.honest_covers_expected && (f.honest_pkh as EvalValue) < f.expected_funds {
        return fail(format!(
            "honestCoversExpected: {} < {}",
            f.honest_pkh, f.expected_funds
        ));
    }
    if let Some(want) = exp.channel_closed {
        if (f.channel == ChannelState::Closed) != want {
            return fail(format!("channelClosed: got {:?}", f.channel));
        }
    }
    if exp.closed_in_time {
        match (f.close_time, f.closed_at) {
            (Some(t), Some(c)) if c <= t + params.channel_closing_time => {}
            (t, c) => return fail(format!("closedInTime: closeTime {t:?}, closed at {c:?}")),
        }
    }
    Ok(())
}
