//! Pessimistic valuation of the honest party's funds.
//!
//! Instead of solving the ownership game over the full state, the evaluator
//! assumes the adversary publishes whichever commitment hurts the honest party
//! most, and subtracts every payout the party has already signed.

pub mod playground;

use serde::{Deserialize, Serialize};

use crate::gamma::{ChannelState, GammaMsg, GammaState, Split, TransferDest};
use crate::interface::SimpleParty;
use crate::params::{Amount, Params, PartyId, Time};
use crate::sigfun::{SigRegistry, SignableMessage};

/// Signed coin valuation; may go negative.
pub type EvalValue = i128;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TimingContext {
    pub now: Time,
    pub last_activation: Time,
    /// Send time of an honest `Revoke` still waiting in the queue.
    pub queued_revoke_at: Option<Time>,
    pub params: Params,
}

impl TimingContext {
    /// Latest time by which an honest `Revoke` is forced onto the ledger.
    pub fn guaranteed_delivery_time(&self) -> Time {
        match self.queued_revoke_at {
            Some(t) => t + self.params.delta_net,
            None => self.last_activation + self.params.delta_wake + self.params.delta_net,
        }
    }

    /// Whether a revocation would land strictly before `deadline`.
    pub fn deliverable_before(&self, deadline: Time) -> bool {
        self.guaranteed_delivery_time() < deadline
    }

    /// Earliest `queued_revoke_at` among the honest party's queued messages.
    pub fn queued_revoke<'a>(
        queue: impl IntoIterator<Item = (Time, &'a GammaMsg)>,
        honest: PartyId,
    ) -> Option<Time> {
        queue
            .into_iter()
            .filter(|(_, m)| **m == GammaMsg::Revoke { sender: honest })
            .map(|(t, _)| t)
            .min()
    }
}

/// What `owner` is guaranteed to get if `s` is, or becomes, the published
/// commitment. `deadline` is set when `s` is already in dispute.
pub fn split_value_for_owner(
    s: &Split,
    owner: PartyId,
    sp: &SimpleParty,
    reg: &SigRegistry,
    tc: &TimingContext,
    capacity: Amount,
    deadline: Option<Time>,
) -> EvalValue {
    let held = sp.channel_info.received_revocations.contains(s)
        && reg.has_revocation(s.cond_party, s.version, s.cond_party);
    let deadline = deadline.unwrap_or(tc.now + tc.params.channel_timelock);
    if held && s.cond_party != owner && tc.deliverable_before(deadline) {
        return capacity as EvalValue;
    }
    if s.uncond_party() == owner {
        s.uncond_amount as EvalValue
    } else if reg.has_revocation(owner, s.version, owner) {
        0
    } else {
        s.cond_amount as EvalValue
    }
}

/// Value the honest party can still enforce from the channel.
pub fn channel_valuation(
    g: &GammaState,
    reg: &SigRegistry,
    sp: &SimpleParty,
    tc: &TimingContext,
) -> EvalValue {
    let honest = sp.channel_info.record_owner;
    match g.channel {
        ChannelState::NoChannel | ChannelState::Closed => 0,
        ChannelState::Open { capacity, .. } => {
            let value = |s: &Split| split_value_for_owner(s, honest, sp, reg, tc, capacity, None);
            let own = sp
                .channel_info
                .best_split_received
                .filter(|b| b.capacity() == capacity)
                .map_or(0, |b| value(&b));
            reg.signed_splits_by(honest)
                .filter(|s| s.capacity() == capacity)
                .map(value)
                .min()
                .map_or(own, |adv| adv.min(own))
        }
        ChannelState::DisputeOpen {
            split, deadline, ..
        } => {
            let v = split_value_for_owner(
                &split,
                honest,
                sp,
                reg,
                tc,
                split.capacity(),
                Some(deadline),
            );
            let already_paid = if split.uncond_party() == honest {
                split.uncond_amount as EvalValue
            } else {
                0
            };
            v - already_paid
        }
    }
}

/// Signed, not yet applied transfers of `honest` that pay coins away.
pub fn pending_on_chain_payout(g: &GammaState, reg: &SigRegistry, honest: PartyId) -> EvalValue {
    reg.iter()
        .filter_map(|(signer, m)| match *m {
            SignableMessage::OnChainTransfer {
                from,
                dest,
                amount,
                seq,
            } if *signer == honest
                && from == honest
                && seq >= g.next_seq[honest]
                && dest != TransferDest::Channel =>
            {
                Some(amount as EvalValue)
            }
            _ => None,
        })
        .sum()
}

pub fn evaluate(
    g: &GammaState,
    reg: &SigRegistry,
    sp: &SimpleParty,
    tc: &TimingContext,
) -> EvalValue {
    let honest = sp.channel_info.record_owner;
    g.immediate_amount_on_chain(honest) as EvalValue + channel_valuation(g, reg, sp, tc)
        - pending_on_chain_payout(g, reg, honest)
}
