//! The ledger: per-party public-key balances plus the lifecycle of the single
//! channel. Outputs of the same owner are merged into one balance; there is no
//! transaction DAG.

use serde::{Deserialize, Serialize};

use crate::params::{Amount, Params, PartyId, PartyMap, Time};
use crate::sigfun::{SigRegistry, SignableMessage};

/// A commitment transaction.
///
/// Publishing it pays `uncond_amount` to the counterparty of `cond_party`
/// at once, and locks `cond_amount` for `cond_party` behind the timelock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Split {
    pub version: u64,
    pub cond_party: PartyId,
    pub cond_amount: Amount,
    pub uncond_amount: Amount,
}

impl Split {
    pub fn capacity(&self) -> Amount {
        self.cond_amount + self.uncond_amount
    }

    pub fn uncond_party(&self) -> PartyId {
        self.cond_party.counterparty()
    }

    /// What `p` receives if this split settles without punishment.
    pub fn share_of(&self, p: PartyId) -> Amount {
        if p == self.cond_party {
            self.cond_amount
        } else {
            self.uncond_amount
        }
    }

    /// The `(version, cond_party)` pair naming this split.
    pub fn id(&self) -> (u64, PartyId) {
        (self.version, self.cond_party)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TransferDest {
    OtherParty,
    Channel,
    Burn,
}

/// Messages the ledger accepts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
pub enum GammaMsg {
    MoveOwnCoins {
        from: PartyId,
        dest: TransferDest,
        amount: Amount,
        seq: u64,
    },
    OpenDispute {
        split: Split,
        sender: PartyId,
    },
    ClaimAfterTimeout {
        sender: PartyId,
    },
    Revoke {
        sender: PartyId,
    },
    AdversaryMint {
        amount: Amount,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
pub enum ChannelState {
    NoChannel,
    Open {
        capacity: Amount,
        funder: PartyId,
    },
    DisputeOpen {
        split: Split,
        opened_at: Time,
        deadline: Time,
    },
    Closed,
}

impl ChannelState {
    fn rank(&self) -> u8 {
        match self {
            ChannelState::NoChannel => 0,
            ChannelState::Open { .. } => 1,
            ChannelState::DisputeOpen { .. } => 2,
            ChannelState::Closed => 3,
        }
    }

    /// Whether `next` is reachable from `self` without going backwards.
    pub fn precedes_or_eq(&self, next: &ChannelState) -> bool {
        match (self, next) {
            (a, b) if a == b => true,
            (a, b) => a.rank() < b.rank(),
        }
    }

    /// NoChannel or Open: no dispute has started.
    pub fn is_normal(&self) -> bool {
        matches!(self, ChannelState::NoChannel | ChannelState::Open { .. })
    }
}

/// Why the ledger ignored a message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    BadSignature,
    Replay,
    InsufficientFunds,
    ChannelState,
    AmountMismatch,
    ZeroFunding,
    Timelock,
    WrongSender,
    MissingRevocation,
    Overflow,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
pub enum GammaEvent {
    Accepted { msg: GammaMsg },
    Rejected { msg: GammaMsg, reason: RejectReason },
}

impl GammaEvent {
    pub fn is_accepted(&self) -> bool {
        matches!(self, GammaEvent::Accepted { .. })
    }

    pub fn msg(&self) -> &GammaMsg {
        match self {
            GammaEvent::Accepted { msg } | GammaEvent::Rejected { msg, .. } => msg,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GammaState {
    pub pkh: PartyMap<Amount>,
    pub burned: Amount,
    pub channel: ChannelState,
    pub next_seq: PartyMap<u64>,
    pub total_minted: Amount,
}

impl GammaState {
    pub fn new(params: &Params) -> Self {
        GammaState {
            pkh: params.initial_coins,
            burned: 0,
            channel: ChannelState::NoChannel,
            next_seq: PartyMap::default(),
            total_minted: 0,
        }
    }

    /// On-chain coins of `p`, excluding anything still in the channel.
    pub fn immediate_amount_on_chain(&self, p: PartyId) -> Amount {
        self.pkh[p]
    }

    pub fn locked_in_channel(&self) -> Amount {
        match self.channel {
            ChannelState::Open { capacity, .. } => capacity,
            ChannelState::DisputeOpen { split, .. } => split.cond_amount,
            ChannelState::NoChannel | ChannelState::Closed => 0,
        }
    }

    /// Left-hand side of the conservation equation (u128: cannot overflow).
    pub fn accounted_coins(&self) -> u128 {
        self.pkh.a as u128
            + self.pkh.b as u128
            + self.burned as u128
            + self.locked_in_channel() as u128
    }

    /// Right-hand side of the conservation equation.
    pub fn issued_coins(&self, params: &Params) -> u128 {
        params.initial_coins.a as u128 + params.initial_coins.b as u128 + self.total_minted as u128
    }

    /// Applies one message. Invalid messages leave the state unchanged and
    /// come back as [`GammaEvent::Rejected`]. `corrupted` is the only identity
    /// allowed to mint.
    pub fn process_msg(
        &self,
        reg: &SigRegistry,
        msg: &GammaMsg,
        now: Time,
        params: &Params,
        corrupted: PartyId,
    ) -> (GammaState, GammaEvent) {
        let mut next = self.clone();
        let event = match next.apply(reg, msg, now, params, corrupted) {
            Ok(()) => GammaEvent::Accepted { msg: msg.clone() },
            Err(reason) => {
                next = self.clone();
                GammaEvent::Rejected {
                    msg: msg.clone(),
                    reason,
                }
            }
        };
        (next, event)
    }

    fn apply(
        &mut self,
        reg: &SigRegistry,
        msg: &GammaMsg,
        now: Time,
        params: &Params,
        corrupted: PartyId,
    ) -> Result<(), RejectReason> {
        match *msg {
            GammaMsg::MoveOwnCoins {
                from,
                dest,
                amount,
                seq,
            } => {
                let order = SignableMessage::OnChainTransfer {
                    from,
                    dest,
                    amount,
                    seq,
                };
                if !reg.verify(from, &order) {
                    return Err(RejectReason::BadSignature);
                }
                if seq != self.next_seq[from] {
                    return Err(RejectReason::Replay);
                }
                if amount > self.pkh[from] {
                    return Err(RejectReason::InsufficientFunds);
                }
                match dest {
                    TransferDest::OtherParty => {
                        let other = from.counterparty();
                        self.pkh[other] = self.pkh[other]
                            .checked_add(amount)
                            .ok_or(RejectReason::Overflow)?;
                    }
                    TransferDest::Burn => {
                        self.burned = self
                            .burned
                            .checked_add(amount)
                            .ok_or(RejectReason::Overflow)?;
                    }
                    TransferDest::Channel => {
                        if self.channel != ChannelState::NoChannel {
                            return Err(RejectReason::ChannelState);
                        }
                        if amount == 0 {
                            return Err(RejectReason::ZeroFunding);
                        }
                        self.channel = ChannelState::Open {
                            capacity: amount,
                            funder: from,
                        };
                    }
                }
                self.pkh[from] -= amount;
                self.next_seq[from] += 1;
                Ok(())
            }
            GammaMsg::OpenDispute { split, .. } => {
                let ChannelState::Open { capacity, .. } = self.channel else {
                    return Err(RejectReason::ChannelState);
                };
                if split.cond_amount.checked_add(split.uncond_amount) != Some(capacity) {
                    return Err(RejectReason::AmountMismatch);
                }
                if !(reg.has_commit_sig(PartyId::A, &split)
                    && reg.has_commit_sig(PartyId::B, &split))
                {
                    return Err(RejectReason::BadSignature);
                }
                let payee = split.uncond_party();
                self.pkh[payee] = self.pkh[payee]
                    .checked_add(split.uncond_amount)
                    .ok_or(RejectReason::Overflow)?;
                self.channel = ChannelState::DisputeOpen {
                    split,
                    opened_at: now,
                    deadline: now + params.channel_timelock,
                };
                Ok(())
            }
            GammaMsg::ClaimAfterTimeout { .. } => {
                // Carries no signature: anyone may trigger settlement once the
                // timelock has passed. The conditional amount goes to its owner.
                let ChannelState::DisputeOpen {
                    split, deadline, ..
                } = self.channel
                else {
                    return Err(RejectReason::ChannelState);
                };
                if now < deadline {
                    return Err(RejectReason::Timelock);
                }
                let owner = split.cond_party;
                self.pkh[owner] = self.pkh[owner]
                    .checked_add(split.cond_amount)
                    .ok_or(RejectReason::Overflow)?;
                self.channel = ChannelState::Closed;
                Ok(())
            }
            GammaMsg::Revoke { sender } => {
                let ChannelState::DisputeOpen { split, .. } = self.channel else {
                    return Err(RejectReason::ChannelState);
                };
                if sender == split.cond_party {
                    return Err(RejectReason::WrongSender);
                }
                if !reg.has_revocation(split.cond_party, split.version, split.cond_party) {
                    return Err(RejectReason::MissingRevocation);
                }
                self.pkh[sender] = self.pkh[sender]
                    .checked_add(split.cond_amount)
                    .ok_or(RejectReason::Overflow)?;
                self.channel = ChannelState::Closed;
                Ok(())
            }
            GammaMsg::AdversaryMint { amount } => {
                let balance = self.pkh[corrupted]
                    .checked_add(amount)
                    .ok_or(RejectReason::Overflow)?;
                let minted = self
                    .total_minted
                    .checked_add(amount)
                    .ok_or(RejectReason::Overflow)?;
                self.pkh[corrupted] = balance;
                self.total_minted = minted;
                Ok(())
            }
        }
    }
}
