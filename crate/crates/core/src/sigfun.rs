//! Ideal signature functionality.
//!
//! Signatures are not objects: a party "has signed" a message iff the pair
//! `(signer, message)` is in the registry. Anyone holding the registry can
//! present any recorded signature, which is how signature malleability is
//! modelled. The registry only grows.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::gamma::{Split, TransferDest};
use crate::params::{Amount, PartyId};

/// Everything that can carry a signature.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all_fields = "camelCase")]
pub enum SignableMessage {
    /// Endorsement of a commitment split.
    CommitSig { split: Split },
    /// Revocation of the split identified by `(version, cond_party)`.
    Revocation { version: u64, cond_party: PartyId },
    /// An order to move `amount` out of `from`'s on-chain balance.
    OnChainTransfer {
        from: PartyId,
        dest: TransferDest,
        amount: Amount,
        seq: u64,
    },
}

/// Append-only set of `(signer, message)` pairs.
///
/// Cloning is cheap; the set is shared until the next insertion.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigRegistry {
    entries: Arc<BTreeSet<(PartyId, SignableMessage)>>,
}

impl SigRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records that `signer` signed `msg`. Idempotent.
    pub fn sign(&mut self, signer: PartyId, msg: SignableMessage) {
        let key = (signer, msg);
        if !self.entries.contains(&key) {
            Arc::make_mut(&mut self.entries).insert(key);
        }
    }

    pub fn verify(&self, signer: PartyId, msg: &SignableMessage) -> bool {
        // BTreeSet lookup needs an owned tuple; the clone is a few words.
        self.entries.contains(&(signer, msg.clone()))
    }

    pub fn has_commit_sig(&self, signer: PartyId, split: &Split) -> bool {
        self.verify(signer, &SignableMessage::CommitSig { split: *split })
    }

    pub fn has_revocation(&self, signer: PartyId, version: u64, cond_party: PartyId) -> bool {
        self.verify(
            signer,
            &SignableMessage::Revocation {
                version,
                cond_party,
            },
        )
    }

    /// All splits `signer` has endorsed with a `CommitSig`.
    pub fn signed_splits_by(&self, signer: PartyId) -> impl Iterator<Item = &Split> + '_ {
        self.entries.iter().filter_map(move |(p, m)| match m {
            SignableMessage::CommitSig { split } if *p == signer => Some(split),
            _ => None,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &(PartyId, SignableMessage)> + '_ {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True iff every pair in `self` is also in `later`.
    pub fn is_prefix_of(&self, later: &SigRegistry) -> bool {
        Arc::ptr_eq(&self.entries, &later.entries) || self.entries.is_subset(&later.entries)
    }
}
