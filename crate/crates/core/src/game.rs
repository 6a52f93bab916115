//! The adversarial game: world state, adversary moves, applicability, and the
//! invariant hooks evaluated after every move.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{evaluate, EvalValue, TimingContext};
use crate::gamma::{ChannelState, GammaEvent, GammaMsg, GammaState};
use crate::interface::{good_simple_party, good_transition, CheckResult, PreSystem, SimpleParty};
use crate::params::{Params, ParamsError, PartyId, Time};
pub use crate::party::PartyMutation;
use crate::party::{Effects, EnvOrder, PartyInput, PartyMsg, PartyState, Phase};
use crate::sigfun::{SigRegistry, SignableMessage};

/// Stable identifiers of the invariant hooks.
pub mod check {
    pub const SOLVENCY: &str = "SOLVENCY";
    pub const MONO_GAMMA: &str = "MONO-GAMMA";
    pub const MONO_PARTY: &str = "MONO-PARTY";
    pub const CLOSING_WORKS: &str = "CLOSING-WORKS";
    pub const WINNING_STATE: &str = "WINNING-STATE";
    /// Reported as an advisory, never as a violation.
    pub const MONO_PARTY_LITERAL: &str = "MONO-PARTY-LITERAL";
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct GameConfig {
    /// Lower `expectedFunds` by the funded amount on `EnvOpenChannel`.
    pub funding_decrements_expected: bool,
    pub party_mutation: Option<PartyMutation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QueuedMsg {
    pub sent_at: Time,
    pub msg: GammaMsg,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
pub enum Move {
    /// Signatures by the corrupted party.
    SignMsg {
        msgs: Vec<SignableMessage>,
    },
    /// Processed by the ledger at once.
    SendMsgToGamma {
        msg: GammaMsg,
    },
    DeliverMsgToGamma {
        index: usize,
    },
    IncrementTime,
    SendMsgToParty {
        msg: PartyMsg,
    },
    ControlEnvironment {
        order: EnvOrder,
    },
}

impl Move {
    pub fn is_party_move(&self) -> bool {
        matches!(
            self,
            Move::SendMsgToParty { .. } | Move::ControlEnvironment { .. }
        )
    }

    pub fn is_gamma_move(&self) -> bool {
        matches!(
            self,
            Move::SendMsgToGamma { .. } | Move::DeliverMsgToGamma { .. }
        )
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GameError {
    #[error(transparent)]
    InvalidParams(#[from] ParamsError),
    #[error("move not applicable: {0}")]
    NotApplicable(String),
}

/// Everything that happened in one move.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepReport {
    pub step: usize,
    #[serde(rename = "move")]
    pub mv: Move,
    pub gamma_events: Vec<GammaEvent>,
    pub party_effects: Option<Effects>,
    pub checks: CheckResult,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub advisories: Vec<String>,
    pub expected_funds: EvalValue,
    pub evaluator: EvalValue,
    pub now: Time,
    pub winning_state_reached: bool,
}

#[derive(Clone, Debug)]
pub struct GameState {
    pub party: PartyState,
    pub gamma: GammaState,
    pub reg: SigRegistry,
    pub queue: Vec<QueuedMsg>,
    pub now: Time,
    pub last_activation: Time,
    pub close_time: Option<Time>,
    /// Signed: an adversary gift followed by payments may push the ledger
    /// entitlement above the initial endowment and back.
    pub expected_funds: EvalValue,
    pub honest: PartyId,
    pub params: Params,
    pub config: GameConfig,
    pub steps: usize,
}

impl GameState {
    pub fn new(params: Params, honest: PartyId, config: GameConfig) -> Result<Self, GameError> {
        let params = params.validate()?.into_inner();
        Ok(GameState {
            party: PartyState::new(honest, &params).with_mutation(config.party_mutation),
            gamma: GammaState::new(&params),
            reg: SigRegistry::new(),
            queue: Vec::new(),
            now: 0,
            last_activation: 0,
            close_time: None,
            expected_funds: params.initial_coins[honest] as EvalValue,
            honest,
            params,
            config,
            steps: 0,
        })
    }

    pub fn corrupted(&self) -> PartyId {
        self.honest.counterparty()
    }

    pub fn view(&self) -> SimpleParty {
        self.party.view(&self.gamma)
    }

    pub fn timing(&self) -> TimingContext {
        TimingContext {
            now: self.now,
            last_activation: self.last_activation,
            queued_revoke_at: TimingContext::queued_revoke(
                self.queue.iter().map(|q| (q.sent_at, &q.msg)),
                self.honest,
            ),
            params: self.params.clone(),
        }
    }

    pub fn evaluate(&self) -> EvalValue {
        evaluate(&self.gamma, &self.reg, &self.view(), &self.timing())
    }

    pub fn adversary_winning_state(&self) -> bool {
        match self.close_time {
            Some(t) => {
                self.now >= t + self.params.channel_closing_time
                    && (self.gamma.immediate_amount_on_chain(self.honest) as EvalValue)
                        < self.expected_funds
            }
            None => false,
        }
    }

    /// Whether the honest party holds a commitment it could publish on the
    /// ledger channel. Without one it can neither lose nor force closure.
    fn honest_has_stake(&self) -> bool {
        let capacity = match self.gamma.channel {
            ChannelState::Open { capacity, .. } => capacity,
            ChannelState::DisputeOpen { split, .. } => split.capacity(),
            ChannelState::NoChannel | ChannelState::Closed => return false,
        };
        self.party
            .best_split_received
            .is_some_and(|b| b.capacity() == capacity)
    }

    fn closing_works(&self) -> bool {
        match self.close_time {
            Some(t) if self.now >= t + self.params.channel_closing_time => {
                self.gamma.channel == ChannelState::Closed || !self.honest_has_stake()
            }
            _ => true,
        }
    }

    fn honest_transfer_queued(&self) -> bool {
        self.queue
            .iter()
            .any(|q| matches!(q.msg, GammaMsg::MoveOwnCoins { from, .. } if from == self.honest))
    }

    pub fn check_applicable(&self, m: &Move) -> Result<(), GameError> {
        let na = |why: &str| Err(GameError::NotApplicable(why.to_string()));
        match m {
            Move::SignMsg { .. } | Move::SendMsgToGamma { .. } | Move::SendMsgToParty { .. } => {
                Ok(())
            }
            Move::DeliverMsgToGamma { index } => {
                if *index < self.queue.len() {
                    Ok(())
                } else {
                    na("queue index out of range")
                }
            }
            Move::IncrementTime => {
                let next = self.now + 1;
                if self
                    .queue
                    .iter()
                    .any(|q| next - q.sent_at > self.params.delta_net)
                {
                    return na("a queued message is due");
                }
                if next - self.last_activation > self.params.delta_wake {
                    return na("honest party is due for activation");
                }
                Ok(())
            }
            Move::ControlEnvironment { order } => match *order {
                EnvOrder::JustCheckGamma => Ok(()),
                EnvOrder::CloseNow => {
                    if matches!(self.gamma.channel, ChannelState::Open { .. }) {
                        Ok(())
                    } else {
                        na("ledger channel is not open")
                    }
                }
                EnvOrder::PayOffChain { amount } => {
                    if !matches!(self.gamma.channel, ChannelState::Open { .. }) {
                        return na("ledger channel is not open");
                    }
                    match self.party.phase {
                        Phase::ChannelOpen {
                            my_balance,
                            payment: None,
                            ..
                        } if amount >= 1 && amount <= my_balance => Ok(()),
                        Phase::ChannelOpen {
                            payment: Some(_), ..
                        } => na("a payment is in flight"),
                        Phase::ChannelOpen { .. } => na("amount exceeds off-chain balance"),
                        _ => na("party channel is not open"),
                    }
                }
                EnvOrder::PayOnChain { amount } => {
                    if amount == 0 || amount > self.gamma.pkh[self.honest] {
                        return na("amount exceeds on-chain balance");
                    }
                    if self.party.has_pending_on_chain_transfer() || self.honest_transfer_queued() {
                        return na("an on-chain payment is pending");
                    }
                    Ok(())
                }
                EnvOrder::EnvOpenChannel { amount } => {
                    if self.party.phase != Phase::Standby || self.party.closing_channel {
                        return na("party is not in standby");
                    }
                    if self.gamma.channel != ChannelState::NoChannel {
                        return na("ledger channel exists");
                    }
                    if amount == 0 || amount > self.gamma.pkh[self.honest] {
                        return na("amount exceeds on-chain balance");
                    }
                    Ok(())
                }
            },
        }
    }

    pub fn move_applicable(&self, m: &Move) -> bool {
        self.check_applicable(m).is_ok()
    }

    fn process(&mut self, msg: &GammaMsg) -> GammaEvent {
        let (next, ev) =
            self.gamma
                .process_msg(&self.reg, msg, self.now, &self.params, self.corrupted());
        self.gamma = next;
        ev
    }

    fn activate(&mut self, input: PartyInput) -> Effects {
        let (next, fx) = self
            .party
            .step(&input, &self.gamma, &self.reg, self.now, &self.params);
        self.party = next;
        for (signer, msg) in &fx.signatures_added {
            self.reg.sign(*signer, msg.clone());
        }
        for msg in &fx.msgs_to_gamma {
            self.queue.push(QueuedMsg {
                sent_at: self.now,
                msg: msg.clone(),
            });
        }
        self.last_activation = self.now;
        if let Some(a) = fx.payment_ack {
            self.expected_funds += a as EvalValue;
        }
        fx
    }

    /// Applies `m` and runs every invariant hook.
    pub fn apply_move(&self, m: &Move) -> Result<(GameState, StepReport), GameError> {
        self.check_applicable(m)?;
        let mut post = self.clone();
        let mut gamma_events = Vec::new();
        let mut party_effects = None;

        match m {
            Move::SignMsg { msgs } => {
                let signer = self.corrupted();
                for msg in msgs {
                    post.reg.sign(signer, msg.clone());
                }
            }
            Move::SendMsgToGamma { msg } => gamma_events.push(post.process(msg)),
            Move::DeliverMsgToGamma { index } => {
                let q = post.queue.remove(*index);
                gamma_events.push(post.process(&q.msg));
            }
            Move::IncrementTime => post.now += 1,
            Move::SendMsgToParty { msg } => {
                party_effects = Some(post.activate(PartyInput::Msg(msg.clone())));
            }
            Move::ControlEnvironment { order } => {
                match *order {
                    EnvOrder::PayOnChain { amount } | EnvOrder::PayOffChain { amount } => {
                        post.expected_funds -= amount as EvalValue;
                    }
                    EnvOrder::EnvOpenChannel { amount }
                        if self.config.funding_decrements_expected =>
                    {
                        post.expected_funds -= amount as EvalValue;
                    }
                    EnvOrder::CloseNow => {
                        post.close_time.get_or_insert(self.now);
                    }
                    _ => {}
                }
                party_effects = Some(post.activate(PartyInput::Env(order.clone())));
            }
        }
        post.steps += 1;

        let (checks, advisories, _, post_eval) =
            check_invariants(self, &post, m, party_effects.as_ref());
        let report = StepReport {
            step: self.steps,
            mv: m.clone(),
            gamma_events,
            party_effects,
            checks,
            advisories,
            expected_funds: post.expected_funds,
            evaluator: post_eval,
            now: post.now,
            winning_state_reached: post.adversary_winning_state(),
        };
        Ok((post, report))
    }
}

/// Amount in flight that the honest party has been ordered to pay but that
/// is not yet reflected in its commitments.
fn entitlement(g: &GameState) -> EvalValue {
    g.expected_funds + g.party.uncommitted_outgoing() as EvalValue
}

/// All hooks for one move. Returns the check result, advisories, and the
/// evaluator before and after.
pub fn check_invariants(
    pre: &GameState,
    post: &GameState,
    m: &Move,
    effects: Option<&Effects>,
) -> (CheckResult, Vec<String>, EvalValue, EvalValue) {
    let mut v: Vec<String> = Vec::new();
    let mut advisories = Vec::new();
    let pre_eval = pre.evaluate();
    let post_eval = post.evaluate();

    if post_eval < post.expected_funds {
        v.push(check::SOLVENCY.into());
    }
    if m.is_gamma_move() && post_eval < pre_eval {
        v.push(check::MONO_GAMMA.into());
    }
    if m.is_party_move() {
        if post_eval - entitlement(post) < pre_eval - entitlement(pre) {
            v.push(check::MONO_PARTY.into());
        }
        if post_eval - post.expected_funds < pre_eval - pre.expected_funds {
            advisories.push(check::MONO_PARTY_LITERAL.to_string());
        }
    }

    let post_view = post.view();
    let mut result = CheckResult::from_violations(v);
    result = result.merge(good_simple_party(&post_view, &post.reg));

    if let Some(fx) = effects {
        let timing = pre.timing();
        let sys = PreSystem {
            gamma: &pre.gamma,
            reg: &pre.reg,
            timing: &timing,
        };
        result = result.merge(good_transition(&pre.view(), &post_view, sys, fx));
    }

    let mut tail = Vec::new();
    if !post.closing_works() {
        tail.push(check::CLOSING_WORKS.to_string());
    }
    if post.adversary_winning_state() {
        tail.push(check::WINNING_STATE.to_string());
    }
    (
        result.merge(CheckResult::from_violations(tail)),
        advisories,
        pre_eval,
        post_eval,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::PartyId::A;

    fn game() -> GameState {
        GameState::new(Params::default(), A, GameConfig::default()).unwrap()
    }

    #[test]
    fn init_game() {
        let g = game();
        assert_eq!(g.expected_funds, 20);
        assert!(!g.adversary_winning_state());
        assert_eq!(g.evaluate(), 20);
    }

    #[test]
    fn invalid_params_rejected() {
        let p = Params {
            channel_closing_time: 19,
            ..Params::default()
        };
        assert!(matches!(
            GameState::new(p, A, GameConfig::default()),
            Err(GameError::InvalidParams(_))
        ));
    }

    #[test]
    fn increment_blocked_by_due_message() {
        let mut g = game();
        g.queue.push(QueuedMsg {
            sent_at: 0,
            msg: GammaMsg::ClaimAfterTimeout { sender: A },
        });
        g.now = 3;
        g.last_activation = 3;
        assert!(!g.move_applicable(&Move::IncrementTime));
        g.now = 2;
        assert!(g.move_applicable(&Move::IncrementTime));
    }

    #[test]
    fn increment_blocked_by_wake_bound() {
        let mut g = game();
        g.now = 2;
        assert!(!g.move_applicable(&Move::IncrementTime));
        g.last_activation = 1;
        assert!(g.move_applicable(&Move::IncrementTime));
    }

    #[test]
    fn close_requires_open_ledger_channel() {
        let g = game();
        let close = Move::ControlEnvironment {
            order: EnvOrder::CloseNow,
        };
        assert!(!g.move_applicable(&close));
        assert!(!g.move_applicable(&Move::DeliverMsgToGamma { index: 0 }));
    }

    #[test]
    fn winning_state_boundaries() {
        let mut g = game();
        g.close_time = Some(5);
        g.now = 24;
        g.gamma.pkh.a = 0;
        assert!(!g.adversary_winning_state());
        g.now = 25;
        g.gamma.pkh.a = 16;
        g.expected_funds = 16;
        assert!(!g.adversary_winning_state());
        g.gamma.pkh.a = 15;
        assert!(g.adversary_winning_state());
    }

    #[test]
    fn pay_on_chain_lowers_expected_and_evaluator() {
        let g = game();
        let (g, r) = g
            .apply_move(&Move::ControlEnvironment {
                order: EnvOrder::PayOnChain { amount: 4 },
            })
            .unwrap();
        assert_eq!(g.expected_funds, 16);
        assert_eq!(r.evaluator, 16);
        assert!(r.checks.ok, "{:?}", r.checks);
        assert_eq!(g.queue.len(), 1);
        let (g, r) = g.apply_move(&Move::DeliverMsgToGamma { index: 0 }).unwrap();
        assert!(r.gamma_events[0].is_accepted());
        assert_eq!(g.gamma.pkh.a, 16);
        assert_eq!(g.gamma.pkh.b, 14);
        assert!(r.checks.ok);
    }
}
