//! Builtin scenarios. Each is produced by running an adaptive adversary
//! against the engine and recording its moves, so the literal move list stays
//! consistent with the party's behavior under any configuration.

use super::driver::Driver;
use super::{ExpectedFinal, Scenario, ScenarioError};
use crate::game::{GameConfig, GameError, GameState, Move, PartyMutation};
use crate::gamma::{ChannelState, GammaMsg, Split};
use crate::params::{Params, PartyId};
use crate::party::EnvOrder;
use crate::sigfun::SignableMessage;

pub const BUILTIN_SCENARIOS: [&str; 4] =
    ["two-honest", "punish", "unilateral-close", "withhold-ready"];

/// One entry of the attack library.
#[derive(Clone, Copy, Debug)]
pub struct AttackEntry {
    pub name: &'static str,
    pub scenario: &'static str,
    pub mutation: Option<PartyMutation>,
    /// The run is expected to show a violation.
    pub must_fail: bool,
}

pub const ATTACK_LIBRARY: [AttackEntry; 4] = [
    AttackEntry {
        name: "punish",
        scenario: "punish",
        mutation: None,
        must_fail: false,
    },
    AttackEntry {
        name: "unilateral-close",
        scenario: "unilateral-close",
        mutation: None,
        must_fail: false,
    },
    AttackEntry {
        name: "withhold-ready",
        scenario: "withhold-ready",
        mutation: None,
        must_fail: false,
    },
    AttackEntry {
        name: "punish-sabotaged",
        scenario: "punish",
        mutation: Some(PartyMutation::DisableRevocationDuty),
        must_fail: true,
    },
];

/// Builds a builtin scenario with the default parameters and honest party A.
/// Final-state assertions are attached only for the unmodified party.
pub fn builtin_scenario(name: &str, config: &GameConfig) -> Result<Scenario, ScenarioError> {
    let params = Params::default();
    let honest = PartyId::A;
    let game = GameState::new(params.clone(), honest, config.clone())?;
    let mut d = Driver::new(game);
    let expected = match name {
        "two-honest" => two_honest(&mut d)?,
        "punish" => punish(&mut d)?,
        "unilateral-close" => unilateral_close(&mut d)?,
        "withhold-ready" => withhold_ready(&mut d)?,
        other => return Err(ScenarioError::UnknownScenario(other.to_string())),
    };
    let stock = config.party_mutation.is_none() && !config.funding_decrements_expected;
    Ok(Scenario {
        name: name.to_string(),
        params,
        honest,
        config: config.clone(),
        moves: d.moves,
        expected_final: stock.then_some(expected),
    })
}

/// Funds a channel of `amount` and completes the opening handshake.
fn open(d: &mut Driver, amount: u64) -> Result<(), GameError> {
    d.env(EnvOrder::EnvOpenChannel { amount })?;
    d.deliver_all()?;
    // The funder notices the confirmation on its next activation.
    d.env(EnvOrder::JustCheckGamma)
}

fn close_deadline(d: &Driver) -> u64 {
    d.game.close_time.expect("close ordered") + d.game.params.channel_closing_time
}

fn two_honest(d: &mut Driver) -> Result<ExpectedFinal, GameError> {
    open(d, 10)?;
    d.env(EnvOrder::PayOffChain { amount: 5 })?;
    d.env(EnvOrder::CloseNow)?;
    let end = close_deadline(d);
    d.idle_until(end, |_| Ok(()))?;
    Ok(ExpectedFinal {
        honest_pkh: Some(15),
        expected_funds: Some(15),
        honest_covers_expected: true,
        channel_closed: Some(true),
        closed_in_time: true,
    })
}

fn punish(d: &mut Driver) -> Result<ExpectedFinal, GameError> {
    let adv = d.game.corrupted();
    open(d, 10)?;
    d.env(EnvOrder::PayOffChain { amount: 5 })?;
    d.mirror_env(EnvOrder::PayOffChain { amount: 3 })?;
    d.env(EnvOrder::CloseNow)?;

    // The counterparty's split after the first payment, now revoked.
    let stale = Split {
        version: 1,
        cond_party: adv,
        cond_amount: 5,
        uncond_amount: 5,
    };
    d.play(Move::SignMsg {
        msgs: vec![SignableMessage::CommitSig { split: stale }],
    })?;
    d.play(Move::SendMsgToGamma {
        msg: GammaMsg::OpenDispute {
            split: stale,
            sender: adv,
        },
    })?;

    let end = close_deadline(d);
    d.idle_until(end, |d| {
        // Collect the stale output the moment the timelock allows it.
        if let ChannelState::DisputeOpen { deadline, .. } = d.game.gamma.channel {
            if d.game.now >= deadline {
                d.play(Move::SendMsgToGamma {
                    msg: GammaMsg::ClaimAfterTimeout { sender: adv },
                })?;
            }
        }
        Ok(())
    })?;
    Ok(ExpectedFinal {
        honest_pkh: Some(20),
        expected_funds: Some(18),
        honest_covers_expected: true,
        channel_closed: Some(true),
        closed_in_time: true,
    })
}

fn unilateral_close(d: &mut Driver) -> Result<ExpectedFinal, GameError> {
    open(d, 10)?;
    d.env(EnvOrder::PayOffChain { amount: 4 })?;
    d.env(EnvOrder::CloseNow)?;
    let end = close_deadline(d);
    d.idle_until(end, |_| Ok(()))?;
    Ok(ExpectedFinal {
        honest_pkh: Some(16),
        expected_funds: Some(16),
        honest_covers_expected: true,
        channel_closed: Some(true),
        closed_in_time: true,
    })
}

/// The counterparty never confirms the opening; the funder closes anyway.
fn withhold_ready(d: &mut Driver) -> Result<ExpectedFinal, GameError> {
    d.env(EnvOrder::EnvOpenChannel { amount: 10 })?;
    d.deliver_all()?;
    d.play(Move::ControlEnvironment {
        order: EnvOrder::JustCheckGamma,
    })?;
    d.inbox.clear();
    d.env(EnvOrder::CloseNow)?;
    let end = close_deadline(d);
    d.idle_until(end, |_| Ok(()))?;
    Ok(ExpectedFinal {
        honest_pkh: Some(20),
        expected_funds: Some(20),
        honest_covers_expected: true,
        channel_closed: Some(true),
        closed_in_time: true,
    })
}
