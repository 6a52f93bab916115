//! The honest channel party.
//!
//! A pure state machine: every activation takes one input (an environment
//! order, a counterparty message, or a bare wake-up), reads the ledger and the
//! signature registry, and returns the next state plus the messages and
//! signatures it produced. Watchtower duties run on every activation.

use serde::{Deserialize, Serialize};

use crate::gamma::{ChannelState, GammaMsg, GammaState, Split, TransferDest};
use crate::interface::{ChannelInfo, SimpleParty};
use crate::params::{Amount, Params, PartyId, Time};
use crate::sigfun::{SigRegistry, SignableMessage};

/// Messages exchanged between the two channel parties.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
pub enum PartyMsg {
    OpenChannel {
        amount: Amount,
    },
    AcceptChannel {
        amount: Amount,
    },
    /// Carries the fundee's first split, signed by the funder.
    FundingCreated {
        split: Split,
    },
    /// Carries the funder's first split, signed by the fundee.
    CommitmentSigned {
        split: Split,
    },
    ChannelReadyByFunder,
    ChannelReadyByFundee,
    Initializer {
        amount: Amount,
    },
    /// Carries the payer's next split, signed by the payee.
    Commit {
        split: Split,
    },
    /// Carries the payee's next split, signed by the payer, and names the
    /// payer's split version just revoked.
    CommitAndRevokeAndAck {
        split: Split,
        revoked_version: u64,
    },
    RevokeAndAck {
        revoked_version: u64,
    },
}

/// Orders from the environment (the user of the node).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
pub enum EnvOrder {
    PayOnChain { amount: Amount },
    EnvOpenChannel { amount: Amount },
    PayOffChain { amount: Amount },
    CloseNow,
    JustCheckGamma,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PartyInput {
    Env(EnvOrder),
    Msg(PartyMsg),
    WakeOnly,
}

/// Deliberate defects, used as negative controls for the invariant hooks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartyMutation {
    /// Never publish held revocations when a revoked split hits the ledger.
    DisableRevocationDuty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FunderStep {
    AwaitAccept,
    AwaitCommitmentSigned,
    AwaitFundingConfirmed,
    AwaitReadyByFundee,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FundeeStep {
    AwaitFundingCreated,
    AwaitReadyByFunder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
pub enum Payment {
    /// We asked to pay `amount` and wait for the payee's `Commit`.
    AwaitCommit { amount: Amount },
    /// We moved to the new version and wait for the payee's revocation of
    /// its previous split (version `prev_version`, balances before payment).
    AwaitRevoke {
        amount: Amount,
        prev_version: u64,
        prev_my: Amount,
        prev_their: Amount,
    },
    /// We are the payee and sent `Commit`.
    Incoming { amount: Amount },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
pub enum Phase {
    Standby,
    OpeningFunder {
        step: FunderStep,
        amount: Amount,
    },
    OpeningFundee {
        step: FundeeStep,
        amount: Amount,
    },
    ChannelOpen {
        version: u64,
        my_balance: Amount,
        their_balance: Amount,
        payment: Option<Payment>,
    },
    ClosingRequested,
    ChannelDone,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PartyState {
    pub me: PartyId,
    pub phase: Phase,
    /// Our latest split, signed by the counterparty.
    pub best_split_received: Option<Split>,
    /// Counterparty splits whose revocation we hold.
    pub received_revocations: Vec<Split>,
    pub on_chain_seq: u64,
    /// Sequence number of our last on-chain transfer while not yet applied.
    pub pending_on_chain_seq: Option<u64>,
    pub funding_broadcast: bool,
    pub closing_channel: bool,
    pub dispute_published: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<PartyMutation>,
}

/// What one activation produced.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Effects {
    pub msgs_to_gamma: Vec<GammaMsg>,
    pub msgs_to_counterparty: Vec<PartyMsg>,
    pub signatures_added: Vec<(PartyId, SignableMessage)>,
    pub payment_ack: Option<Amount>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub ignored: Vec<String>,
}

impl Effects {
    /// Concatenation of two consecutive activations' effects.
    pub fn then(mut self, later: &Effects) -> Effects {
        self.msgs_to_gamma
            .extend(later.msgs_to_gamma.iter().cloned());
        self.msgs_to_counterparty
            .extend(later.msgs_to_counterparty.iter().cloned());
        self.signatures_added
            .extend(later.signatures_added.iter().cloned());
        self.payment_ack = match (self.payment_ack, later.payment_ack) {
            (Some(x), Some(y)) => Some(x + y),
            (x, y) => x.or(y),
        };
        self.ignored.extend(later.ignored.iter().cloned());
        self
    }
}

/// Read-only context of one activation.
struct Ctx<'a> {
    gamma: &'a GammaState,
    reg: &'a SigRegistry,
    now: Time,
}

impl PartyState {
    pub fn new(me: PartyId, _params: &Params) -> Self {
        PartyState {
            me,
            phase: Phase::Standby,
            best_split_received: None,
            received_revocations: Vec::new(),
            on_chain_seq: 0,
            pending_on_chain_seq: None,
            funding_broadcast: false,
            closing_channel: false,
            dispute_published: false,
            mutation: None,
        }
    }

    pub fn with_mutation(mut self, mutation: Option<PartyMutation>) -> Self {
        self.mutation = mutation;
        self
    }

    fn cp(&self) -> PartyId {
        self.me.counterparty()
    }

    /// Amount ordered out of the channel that is not yet reflected in our
    /// best split.
    pub fn uncommitted_outgoing(&self) -> Amount {
        match self.phase {
            Phase::ChannelOpen {
                payment: Some(Payment::AwaitCommit { amount }),
                ..
            } => amount,
            _ => 0,
        }
    }

    pub fn has_pending_on_chain_transfer(&self) -> bool {
        self.pending_on_chain_seq.is_some()
    }

    /// `(my_balance, payment)` when the channel is usable for payments.
    pub fn open_balances(&self) -> Option<(Amount, Amount, Option<Payment>)> {
        match self.phase {
            Phase::ChannelOpen {
                my_balance,
                their_balance,
                payment,
                ..
            } => Some((my_balance, their_balance, payment)),
            _ => None,
        }
    }

    pub fn holds_revocation_for(&self, s: &Split) -> bool {
        self.received_revocations.contains(s)
    }

    /// One activation.
    pub fn step(
        &self,
        input: &PartyInput,
        gamma: &GammaState,
        reg: &SigRegistry,
        now: Time,
        _params: &Params,
    ) -> (PartyState, Effects) {
        let mut st = self.clone();
        let mut fx = Effects::default();
        let ctx = Ctx { gamma, reg, now };

        if let Some(seq) = st.pending_on_chain_seq {
            if gamma.next_seq[st.me] > seq {
                st.pending_on_chain_seq = None;
            }
        }
        if gamma.channel == ChannelState::Closed && st.best_split_received.is_some() {
            st.phase = Phase::ChannelDone;
        }

        match input {
            PartyInput::Env(order) => st.on_env(order, &ctx, &mut fx),
            PartyInput::Msg(msg) => st.on_msg(msg, &ctx, &mut fx),
            PartyInput::WakeOnly => {}
        }
        st.duties(&ctx, &mut fx);
        (st, fx)
    }

    fn sign(&self, fx: &mut Effects, msg: SignableMessage) {
        fx.signatures_added.push((self.me, msg));
    }

    fn ignore(fx: &mut Effects, why: impl Into<String>) {
        fx.ignored.push(why.into());
    }

    /// Ledger channel is open with exactly this capacity.
    fn ledger_open_with(gamma: &GammaState, capacity: Amount) -> bool {
        matches!(gamma.channel, ChannelState::Open { capacity: c, .. } if c == capacity)
    }

    fn queue_transfer(&mut self, fx: &mut Effects, dest: TransferDest, amount: Amount) {
        let seq = self.on_chain_seq;
        self.sign(
            fx,
            SignableMessage::OnChainTransfer {
                from: self.me,
                dest,
                amount,
                seq,
            },
        );
        fx.msgs_to_gamma.push(GammaMsg::MoveOwnCoins {
            from: self.me,
            dest,
            amount,
            seq,
        });
        self.on_chain_seq += 1;
        self.pending_on_chain_seq = Some(seq);
    }

    fn on_env(&mut self, order: &EnvOrder, ctx: &Ctx<'_>, fx: &mut Effects) {
        match *order {
            EnvOrder::PayOnChain { amount } => {
                if amount == 0 || amount > ctx.gamma.pkh[self.me] {
                    return Self::ignore(fx, "pay-on-chain: insufficient");
                }
                if self.has_pending_on_chain_transfer() {
                    return Self::ignore(fx, "pay-on-chain: transfer pending");
                }
                self.queue_transfer(fx, TransferDest::OtherParty, amount);
            }
            EnvOrder::EnvOpenChannel { amount } => {
                if self.phase != Phase::Standby || self.closing_channel {
                    return Self::ignore(fx, "open: not standby");
                }
                if ctx.gamma.channel != ChannelState::NoChannel {
                    return Self::ignore(fx, "open: ledger channel exists");
                }
                if amount == 0 || amount > ctx.gamma.pkh[self.me] {
                    return Self::ignore(fx, "open: insufficient");
                }
                self.phase = Phase::OpeningFunder {
                    step: FunderStep::AwaitAccept,
                    amount,
                };
                fx.msgs_to_counterparty
                    .push(PartyMsg::OpenChannel { amount });
            }
            EnvOrder::PayOffChain { amount } => {
                let Phase::ChannelOpen {
                    my_balance,
                    their_balance,
                    payment,
                    ..
                } = self.phase
                else {
                    return Self::ignore(fx, "pay-off-chain: channel not open");
                };
                if payment.is_some() {
                    return Self::ignore(fx, "pay-off-chain: payment in flight");
                }
                if amount == 0 || amount > my_balance {
                    return Self::ignore(fx, "pay-off-chain: insufficient");
                }
                if self.closing_channel
                    || !Self::ledger_open_with(ctx.gamma, my_balance + their_balance)
                {
                    return Self::ignore(fx, "pay-off-chain: ledger channel not open");
                }
                self.set_payment(Some(Payment::AwaitCommit { amount }));
                fx.msgs_to_counterparty
                    .push(PartyMsg::Initializer { amount });
            }
            EnvOrder::CloseNow => {
                self.closing_channel = true;
                if self.best_split_received.is_some() && self.phase != Phase::ChannelDone {
                    self.phase = Phase::ClosingRequested;
                }
                // Publishing happens in the duties below.
            }
            EnvOrder::JustCheckGamma => {}
        }
    }

    fn set_payment(&mut self, p: Option<Payment>) {
        if let Phase::ChannelOpen { payment, .. } = &mut self.phase {
            *payment = p;
        }
    }

    fn on_msg(&mut self, msg: &PartyMsg, ctx: &Ctx<'_>, fx: &mut Effects) {
        let me = self.me;
        let cp = self.cp();
        if self.closing_channel && !matches!(msg, PartyMsg::RevokeAndAck { .. }) {
            return Self::ignore(fx, "closing: channel messages ignored");
        }
        match *msg {
            PartyMsg::OpenChannel { amount } => {
                if self.phase != Phase::Standby || ctx.gamma.channel != ChannelState::NoChannel {
                    return Self::ignore(fx, "open-channel: not standby");
                }
                if amount == 0 {
                    return Self::ignore(fx, "open-channel: zero amount");
                }
                self.phase = Phase::OpeningFundee {
                    step: FundeeStep::AwaitFundingCreated,
                    amount,
                };
                fx.msgs_to_counterparty
                    .push(PartyMsg::AcceptChannel { amount });
            }
            PartyMsg::AcceptChannel { amount } => {
                let Phase::OpeningFunder {
                    step: FunderStep::AwaitAccept,
                    amount: want,
                } = self.phase
                else {
                    return Self::ignore(fx, "accept-channel: unexpected");
                };
                if amount != want {
                    return Self::ignore(fx, "accept-channel: amount mismatch");
                }
                let fundee_first = Split {
                    version: 0,
                    cond_party: cp,
                    cond_amount: 0,
                    uncond_amount: amount,
                };
                self.sign(
                    fx,
                    SignableMessage::CommitSig {
                        split: fundee_first,
                    },
                );
                self.phase = Phase::OpeningFunder {
                    step: FunderStep::AwaitCommitmentSigned,
                    amount,
                };
                fx.msgs_to_counterparty.push(PartyMsg::FundingCreated {
                    split: fundee_first,
                });
            }
            PartyMsg::FundingCreated { split } => {
                let Phase::OpeningFundee {
                    step: FundeeStep::AwaitFundingCreated,
                    amount,
                } = self.phase
                else {
                    return Self::ignore(fx, "funding-created: unexpected");
                };
                let mine = Split {
                    version: 0,
                    cond_party: me,
                    cond_amount: 0,
                    uncond_amount: amount,
                };
                if split != mine || !ctx.reg.has_commit_sig(cp, &split) {
                    return Self::ignore(fx, "funding-created: invalid split");
                }
                let funder_first = Split {
                    version: 0,
                    cond_party: cp,
                    cond_amount: amount,
                    uncond_amount: 0,
                };
                self.sign(
                    fx,
                    SignableMessage::CommitSig {
                        split: funder_first,
                    },
                );
                self.best_split_received = Some(mine);
                self.phase = Phase::OpeningFundee {
                    step: FundeeStep::AwaitReadyByFunder,
                    amount,
                };
                fx.msgs_to_counterparty.push(PartyMsg::CommitmentSigned {
                    split: funder_first,
                });
            }
            PartyMsg::CommitmentSigned { split } => {
                let Phase::OpeningFunder {
                    step: FunderStep::AwaitCommitmentSigned,
                    amount,
                } = self.phase
                else {
                    return Self::ignore(fx, "commitment-signed: unexpected");
                };
                let mine = Split {
                    version: 0,
                    cond_party: me,
                    cond_amount: amount,
                    uncond_amount: 0,
                };
                if split != mine || !ctx.reg.has_commit_sig(cp, &split) {
                    return Self::ignore(fx, "commitment-signed: invalid split");
                }
                if ctx.gamma.channel != ChannelState::NoChannel {
                    return Self::ignore(fx, "commitment-signed: ledger channel exists");
                }
                if amount > ctx.gamma.pkh[me] || self.has_pending_on_chain_transfer() {
                    return Self::ignore(fx, "commitment-signed: cannot fund");
                }
                self.best_split_received = Some(mine);
                self.queue_transfer(fx, TransferDest::Channel, amount);
                self.funding_broadcast = true;
                self.phase = Phase::OpeningFunder {
                    step: FunderStep::AwaitFundingConfirmed,
                    amount,
                };
            }
            PartyMsg::ChannelReadyByFunder => {
                let Phase::OpeningFundee {
                    step: FundeeStep::AwaitReadyByFunder,
                    amount,
                } = self.phase
                else {
                    return Self::ignore(fx, "ready-by-funder: unexpected");
                };
                let funded = ChannelState::Open {
                    capacity: amount,
                    funder: cp,
                };
                if ctx.gamma.channel != funded {
                    return Self::ignore(fx, "ready-by-funder: funding not on ledger");
                }
                self.phase = Phase::ChannelOpen {
                    version: 0,
                    my_balance: 0,
                    their_balance: amount,
                    payment: None,
                };
                fx.msgs_to_counterparty.push(PartyMsg::ChannelReadyByFundee);
            }
            PartyMsg::ChannelReadyByFundee => {
                let Phase::OpeningFunder {
                    step: FunderStep::AwaitReadyByFundee,
                    amount,
                } = self.phase
                else {
                    return Self::ignore(fx, "ready-by-fundee: unexpected");
                };
                self.phase = Phase::ChannelOpen {
                    version: 0,
                    my_balance: amount,
                    their_balance: 0,
                    payment: None,
                };
            }
            PartyMsg::Initializer { amount } => {
                let Phase::ChannelOpen {
                    version,
                    my_balance,
                    their_balance,
                    payment,
                } = self.phase
                else {
                    return Self::ignore(fx, "initializer: channel not open");
                };
                if payment.is_some() {
                    return Self::ignore(fx, "initializer: payment in flight");
                }
                if amount == 0 || amount > their_balance {
                    return Self::ignore(fx, "initializer: insufficient");
                }
                if !Self::ledger_open_with(ctx.gamma, my_balance + their_balance) {
                    return Self::ignore(fx, "initializer: ledger channel not open");
                }
                let payer_next = Split {
                    version: version + 1,
                    cond_party: cp,
                    cond_amount: their_balance - amount,
                    uncond_amount: my_balance + amount,
                };
                self.sign(fx, SignableMessage::CommitSig { split: payer_next });
                self.set_payment(Some(Payment::Incoming { amount }));
                fx.msgs_to_counterparty
                    .push(PartyMsg::Commit { split: payer_next });
            }
            PartyMsg::Commit { split } => {
                let Phase::ChannelOpen {
                    version,
                    my_balance,
                    their_balance,
                    payment: Some(Payment::AwaitCommit { amount }),
                } = self.phase
                else {
                    return Self::ignore(fx, "commit: unexpected");
                };
                if !Self::ledger_open_with(ctx.gamma, my_balance + their_balance) {
                    return Self::ignore(fx, "commit: ledger channel not open");
                }
                let mine = Split {
                    version: version + 1,
                    cond_party: me,
                    cond_amount: my_balance - amount,
                    uncond_amount: their_balance + amount,
                };
                if split != mine || !ctx.reg.has_commit_sig(cp, &split) {
                    return Self::ignore(fx, "commit: invalid split");
                }
                let theirs = Split {
                    version: version + 1,
                    cond_party: cp,
                    cond_amount: their_balance + amount,
                    uncond_amount: my_balance - amount,
                };
                self.sign(fx, SignableMessage::CommitSig { split: theirs });
                self.sign(
                    fx,
                    SignableMessage::Revocation {
                        version,
                        cond_party: me,
                    },
                );
                self.best_split_received = Some(mine);
                self.phase = Phase::ChannelOpen {
                    version: version + 1,
                    my_balance: my_balance - amount,
                    their_balance: their_balance + amount,
                    payment: Some(Payment::AwaitRevoke {
                        amount,
                        prev_version: version,
                        prev_my: my_balance,
                        prev_their: their_balance,
                    }),
                };
                fx.msgs_to_counterparty
                    .push(PartyMsg::CommitAndRevokeAndAck {
                        split: theirs,
                        revoked_version: version,
                    });
            }
            PartyMsg::CommitAndRevokeAndAck {
                split,
                revoked_version,
            } => {
                let Phase::ChannelOpen {
                    version,
                    my_balance,
                    their_balance,
                    payment: Some(Payment::Incoming { amount }),
                } = self.phase
                else {
                    return Self::ignore(fx, "commit-revoke-ack: unexpected");
                };
                if !Self::ledger_open_with(ctx.gamma, my_balance + their_balance) {
                    return Self::ignore(fx, "commit-revoke-ack: ledger channel not open");
                }
                let mine = Split {
                    version: version + 1,
                    cond_party: me,
                    cond_amount: my_balance + amount,
                    uncond_amount: their_balance - amount,
                };
                if split != mine
                    || revoked_version != version
                    || !ctx.reg.has_commit_sig(cp, &split)
                    || !ctx.reg.has_revocation(cp, version, cp)
                {
                    return Self::ignore(fx, "commit-revoke-ack: invalid");
                }
                let their_old = Split {
                    version,
                    cond_party: cp,
                    cond_amount: their_balance,
                    uncond_amount: my_balance,
                };
                if !self.received_revocations.contains(&their_old) {
                    self.received_revocations.push(their_old);
                }
                self.best_split_received = Some(mine);
                self.sign(
                    fx,
                    SignableMessage::Revocation {
                        version,
                        cond_party: me,
                    },
                );
                self.phase = Phase::ChannelOpen {
                    version: version + 1,
                    my_balance: my_balance + amount,
                    their_balance: their_balance - amount,
                    payment: None,
                };
                fx.msgs_to_counterparty.push(PartyMsg::RevokeAndAck {
                    revoked_version: version,
                });
                fx.payment_ack = Some(amount);
            }
            PartyMsg::RevokeAndAck { revoked_version } => {
                let Phase::ChannelOpen {
                    payment:
                        Some(Payment::AwaitRevoke {
                            prev_version,
                            prev_my,
                            prev_their,
                            ..
                        }),
                    ..
                } = self.phase
                else {
                    return Self::ignore(fx, "revoke-ack: unexpected");
                };
                if revoked_version != prev_version || !ctx.reg.has_revocation(cp, prev_version, cp)
                {
                    return Self::ignore(fx, "revoke-ack: invalid");
                }
                let their_old = Split {
                    version: prev_version,
                    cond_party: cp,
                    cond_amount: prev_their,
                    uncond_amount: prev_my,
                };
                if !self.received_revocations.contains(&their_old) {
                    self.received_revocations.push(their_old);
                }
                self.set_payment(None);
            }
        }
    }

    /// Checks performed on every activation.
    fn duties(&mut self, ctx: &Ctx<'_>, fx: &mut Effects) {
        let me = self.me;

        // Funding confirmation.
        if let Phase::OpeningFunder {
            step: FunderStep::AwaitFundingConfirmed,
            amount,
        } = self.phase
        {
            let ours = ChannelState::Open {
                capacity: amount,
                funder: me,
            };
            if self.funding_broadcast && ctx.gamma.channel == ours {
                self.phase = Phase::OpeningFunder {
                    step: FunderStep::AwaitReadyByFundee,
                    amount,
                };
                fx.msgs_to_counterparty.push(PartyMsg::ChannelReadyByFunder);
            }
        }

        // Unilateral close once ordered.
        if self.closing_channel && !self.dispute_published {
            if let Some(best) = self.best_split_received {
                if Self::ledger_open_with(ctx.gamma, best.capacity()) {
                    self.sign(fx, SignableMessage::CommitSig { split: best });
                    fx.msgs_to_gamma.push(GammaMsg::OpenDispute {
                        split: best,
                        sender: me,
                    });
                    self.dispute_published = true;
                }
            }
        }

        if let ChannelState::DisputeOpen {
            split, deadline, ..
        } = ctx.gamma.channel
        {
            if self.holds_revocation_for(&split) {
                if self.mutation != Some(PartyMutation::DisableRevocationDuty) {
                    fx.msgs_to_gamma.push(GammaMsg::Revoke { sender: me });
                }
            } else if ctx.now >= deadline {
                fx.msgs_to_gamma
                    .push(GammaMsg::ClaimAfterTimeout { sender: me });
            }
        }
    }

    /// The implementation-agnostic view of this party.
    pub fn view(&self, gamma: &GammaState) -> SimpleParty {
        let channel_balance_ext = match (self.phase, self.best_split_received) {
            (Phase::ChannelOpen { my_balance, .. }, _) => my_balance,
            (Phase::ClosingRequested, Some(best)) => match gamma.channel {
                ChannelState::Open { capacity, .. } if capacity == best.capacity() => {
                    best.cond_amount
                }
                ChannelState::DisputeOpen { split, .. } if split == best => best.cond_amount,
                _ => 0,
            },
            _ => 0,
        };
        SimpleParty {
            on_chain_balance: gamma.pkh[self.me],
            channel_balance_ext,
            closing_channel: self.closing_channel,
            channel_info: ChannelInfo {
                record_owner: self.me,
                best_split_received: self.best_split_received,
                received_revocations: self.received_revocations.clone(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interface::good_simple_party;
    use crate::params::PartyId::{A, B};

    fn split(v: u64, cp: PartyId, c: Amount, u: Amount) -> Split {
        Split {
            version: v,
            cond_party: cp,
            cond_amount: c,
            uncond_amount: u,
        }
    }

    fn apply_sigs(reg: &mut SigRegistry, fx: &Effects) {
        for (s, m) in &fx.signatures_added {
            reg.sign(*s, m.clone());
        }
    }

    #[test]
    fn fresh_party_is_standby() {
        let p = Params::default();
        let st = PartyState::new(A, &p);
        assert_eq!(st.phase, Phase::Standby);
        let g = GammaState::new(&p);
        let view = st.view(&g);
        assert_eq!(view.channel_balance_ext, 0);
        assert_eq!(view.channel_info.best_split_received, None);
        assert!(good_simple_party(&view, &SigRegistry::new()).ok);
    }

    #[test]
    fn open_order_sends_open_channel() {
        let p = Params::default();
        let g = GammaState::new(&p);
        let st = PartyState::new(A, &p);
        let (st, fx) = st.step(
            &PartyInput::Env(EnvOrder::EnvOpenChannel { amount: 10 }),
            &g,
            &SigRegistry::new(),
            0,
            &p,
        );
        assert_eq!(
            fx.msgs_to_counterparty,
            vec![PartyMsg::OpenChannel { amount: 10 }]
        );
        assert!(fx.msgs_to_gamma.is_empty());
        assert!(fx.signatures_added.is_empty());
        assert!(matches!(
            st.phase,
            Phase::OpeningFunder {
                step: FunderStep::AwaitAccept,
                amount: 10
            }
        ));
    }

    #[test]
    fn open_order_beyond_balance_ignored() {
        let p = Params::default();
        let g = GammaState::new(&p);
        let st = PartyState::new(A, &p);
        let (st2, fx) = st.step(
            &PartyInput::Env(EnvOrder::EnvOpenChannel { amount: 21 }),
            &g,
            &SigRegistry::new(),
            0,
            &p,
        );
        assert_eq!(st2, st);
        assert_eq!(fx.ignored.len(), 1);
    }

    fn open_state(version: u64, my: Amount, their: Amount) -> (PartyState, GammaState) {
        let p = Params::default();
        let mut st = PartyState::new(A, &p);
        st.phase = Phase::ChannelOpen {
            version,
            my_balance: my,
            their_balance: their,
            payment: None,
        };
        st.best_split_received = Some(split(version, A, my, their));
        let mut g = GammaState::new(&p);
        g.pkh.a = 10;
        g.channel = ChannelState::Open {
            capacity: my + their,
            funder: A,
        };
        (st, g)
    }

    #[test]
    fn initializer_beyond_their_balance_ignored() {
        let (st, g) = open_state(1, 8, 2);
        let (st2, fx) = st.step(
            &PartyInput::Msg(PartyMsg::Initializer { amount: 3 }),
            &g,
            &SigRegistry::new(),
            5,
            &Params::default(),
        );
        assert_eq!(st2, st);
        assert_eq!(fx.ignored, vec!["initializer: insufficient".to_string()]);
    }

    #[test]
    fn watchtower_revokes_published_revoked_split() {
        let (mut st, mut g) = open_state(1, 8, 2);
        let old = split(0, B, 0, 10);
        st.received_revocations.push(old);
        let mut reg = SigRegistry::new();
        reg.sign(
            B,
            SignableMessage::Revocation {
                version: 0,
                cond_party: B,
            },
        );
        g.channel = ChannelState::DisputeOpen {
            split: old,
            opened_at: 4,
            deadline: 10,
        };
        let (_, fx) = st.step(
            &PartyInput::Env(EnvOrder::JustCheckGamma),
            &g,
            &reg,
            5,
            &Params::default(),
        );
        assert!(fx.msgs_to_gamma.contains(&GammaMsg::Revoke { sender: A }));

        let sabotaged = st.with_mutation(Some(PartyMutation::DisableRevocationDuty));
        let (_, fx) = sabotaged.step(&PartyInput::WakeOnly, &g, &reg, 5, &Params::default());
        assert!(fx.msgs_to_gamma.is_empty());
    }

    #[test]
    fn claims_after_deadline() {
        let (st, mut g) = open_state(1, 6, 4);
        let mine = split(1, A, 6, 4);
        g.channel = ChannelState::DisputeOpen {
            split: mine,
            opened_at: 3,
            deadline: 9,
        };
        let p = Params::default();
        let (_, fx) = st.step(&PartyInput::WakeOnly, &g, &SigRegistry::new(), 8, &p);
        assert!(fx.msgs_to_gamma.is_empty());
        let (_, fx) = st.step(&PartyInput::WakeOnly, &g, &SigRegistry::new(), 9, &p);
        assert_eq!(
            fx.msgs_to_gamma,
            vec![GammaMsg::ClaimAfterTimeout { sender: A }]
        );
    }

    /// Drives both parties through open and one payment with prompt delivery.
    #[test]
    fn open_and_pay_handshake() {
        let p = Params::default();
        let mut g = GammaState::new(&p);
        let mut reg = SigRegistry::new();
        let mut a = PartyState::new(A, &p);
        let mut b = PartyState::new(B, &p);
        let mut acked = 0;

        let mut to_b = vec![];
        let mut to_a = vec![];
        let (na, fx) = a.step(
            &PartyInput::Env(EnvOrder::EnvOpenChannel { amount: 10 }),
            &g,
            &reg,
            0,
            &p,
        );
        a = na;
        to_b.extend(fx.msgs_to_counterparty);

        let mut rounds = 0;
        let mut paid = false;
        while rounds < 40 {
            rounds += 1;
            for m in std::mem::take(&mut to_b) {
                let (nb, fx) = b.step(&PartyInput::Msg(m), &g, &reg, 0, &p);
                b = nb;
                apply_sigs(&mut reg, &fx);
                to_a.extend(fx.msgs_to_counterparty);
                for gm in fx.msgs_to_gamma {
                    g = g.process_msg(&reg, &gm, 0, &p, B).0;
                }
            }
            for m in std::mem::take(&mut to_a) {
                let (na, fx) = a.step(&PartyInput::Msg(m), &g, &reg, 0, &p);
                a = na;
                apply_sigs(&mut reg, &fx);
                acked += fx.payment_ack.unwrap_or(0);
                to_b.extend(fx.msgs_to_counterparty);
                for gm in fx.msgs_to_gamma {
                    let (ng, ev) = g.process_msg(&reg, &gm, 0, &p, B);
                    assert!(ev.is_accepted(), "{ev:?}");
                    g = ng;
                }
                assert!(good_simple_party(&a.view(&g), &reg).ok);
            }
            // wake A so it notices the funding confirmation
            let (na, fx) = a.step(&PartyInput::WakeOnly, &g, &reg, 0, &p);
            a = na;
            to_b.extend(fx.msgs_to_counterparty);
            if !paid && matches!(a.phase, Phase::ChannelOpen { .. }) {
                let (na, fx) = a.step(
                    &PartyInput::Env(EnvOrder::PayOffChain { amount: 5 }),
                    &g,
                    &reg,
                    0,
                    &p,
                );
                a = na;
                to_b.extend(fx.msgs_to_counterparty);
                paid = true;
            }
        }
        assert_eq!(acked, 0);
        assert_eq!(
            a.phase,
            Phase::ChannelOpen {
                version: 1,
                my_balance: 5,
                their_balance: 5,
                payment: None
            }
        );
        assert_eq!(
            b.phase,
            Phase::ChannelOpen {
                version: 1,
                my_balance: 5,
                their_balance: 5,
                payment: None
            }
        );
        assert_eq!(a.best_split_received, Some(split(1, A, 5, 5)));
        assert_eq!(a.received_revocations, vec![split(0, B, 0, 10)]);
        assert_eq!(b.received_revocations, vec![split(0, A, 10, 0)]);
        assert!(good_simple_party(&b.view(&g), &reg).ok);
    }

    #[test]
    fn effects_compose() {
        let a = Effects {
            payment_ack: Some(2),
            ..Effects::default()
        };
        let b = Effects {
            payment_ack: Some(3),
            msgs_to_gamma: vec![GammaMsg::Revoke { sender: A }],
            ..Effects::default()
        };
        let c = a.then(&b);
        assert_eq!(c.payment_ack, Some(5));
        assert_eq!(c.msgs_to_gamma.len(), 1);
    }
}
