//! Random generators shared by the property and acceptance tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use channel_arena::evaluator::playground::{
    KeyId, Output, OutputId, PlainTx, PlaygroundInstance, UtxoState,
};
use channel_arena::{
    ChannelState, GammaEvent, GammaMsg, GammaState, Params, PartyId, SigRegistry, SignableMessage,
    Split, TransferDest,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

const KEYS: [&str; 2] = ["pk", "q"];

fn key(rng: &mut ChaCha8Rng) -> KeyId {
    KeyId(KEYS[rng.gen_range(0..2)].to_string())
}

/// A conserving instance with at most three initial outputs and three
/// transactions. Transactions may conflict over inputs.
pub fn random_instance(rng: &mut ChaCha8Rng) -> PlaygroundInstance {
    let mut pool: Vec<Output> = Vec::new();
    let initial = rng.gen_range(1..=3);
    for n in 0..initial {
        pool.push(Output {
            id: OutputId(format!("u{n}")),
            key: key(rng),
            amount: rng.gen_range(0..=10),
        });
    }
    let utxos = UtxoState {
        outputs: pool.clone(),
    };
    let mut txs = Vec::new();
    for t in 0..rng.gen_range(0..=3) {
        let k = rng.gen_range(1..=pool.len().min(2));
        let inputs: Vec<Output> = pool.choose_multiple(rng, k).cloned().collect();
        let total: u64 = inputs.iter().map(|o| o.amount).sum();
        let first = rng.gen_range(0..=total);
        let mut outputs = vec![Output {
            id: OutputId(format!("t{t}o0")),
            key: key(rng),
            amount: first,
        }];
        if first < total || rng.gen_bool(0.3) {
            outputs.push(Output {
                id: OutputId(format!("t{t}o1")),
                key: key(rng),
                amount: total - first,
            });
        }
        let signed_by: BTreeSet<KeyId> = KEYS
            .iter()
            .filter(|_| rng.gen_bool(0.6))
            .map(|k| KeyId(k.to_string()))
            .collect();
        pool.extend(outputs.iter().cloned());
        txs.push(PlainTx {
            id: format!("t{t}"),
            inputs: inputs.into_iter().map(|o| o.id).collect(),
            outputs,
            signed_by,
        });
    }
    PlaygroundInstance {
        name: String::new(),
        utxos,
        txs,
        key: KeyId("pk".into()),
        horizon: rng.gen_range(1..=4),
    }
}

fn party(rng: &mut ChaCha8Rng) -> PartyId {
    if rng.gen_bool(0.5) {
        PartyId::A
    } else {
        PartyId::B
    }
}

/// A message biased toward ones the ledger will accept, with the signatures
/// it needs usually (not always) present in `reg`.
fn random_msg(rng: &mut ChaCha8Rng, g: &GammaState, reg: &mut SigRegistry) -> GammaMsg {
    let from = party(rng);
    match rng.gen_range(0..10) {
        0..=3 => {
            let dest = *[
                TransferDest::OtherParty,
                TransferDest::Channel,
                TransferDest::Burn,
            ]
            .choose(rng)
            .unwrap();
            let amount = rng.gen_range(0..=g.pkh[from].max(1));
            let seq = if rng.gen_bool(0.9) {
                g.next_seq[from]
            } else {
                rng.gen_range(0..4)
            };
            if rng.gen_bool(0.9) {
                reg.sign(
                    from,
                    SignableMessage::OnChainTransfer {
                        from,
                        dest,
                        amount,
                        seq,
                    },
                );
            }
            GammaMsg::MoveOwnCoins {
                from,
                dest,
                amount,
                seq,
            }
        }
        4..=5 => {
            let capacity = match g.channel {
                ChannelState::Open { capacity, .. } => capacity,
                _ => rng.gen_range(1..=10),
            };
            let cond_amount = rng.gen_range(0..=capacity);
            let split = Split {
                version: rng.gen_range(0..3),
                cond_party: party(rng),
                cond_amount,
                uncond_amount: capacity - cond_amount,
            };
            if rng.gen_bool(0.9) {
                reg.sign(split.uncond_party(), SignableMessage::CommitSig { split });
            }
            if rng.gen_bool(0.9) {
                reg.sign(split.cond_party, SignableMessage::CommitSig { split });
            }
            GammaMsg::OpenDispute {
                split,
                sender: split.cond_party,
            }
        }
        6 => {
            if let ChannelState::DisputeOpen { split, .. } = g.channel {
                if rng.gen_bool(0.8) {
                    reg.sign(
                        split.cond_party,
                        SignableMessage::Revocation {
                            version: split.version,
                            cond_party: split.cond_party,
                        },
                    );
                }
            }
            GammaMsg::Revoke { sender: from }
        }
        7..=8 => GammaMsg::ClaimAfterTimeout { sender: from },
        _ => GammaMsg::AdversaryMint {
            amount: rng.gen_range(0..5),
        },
    }
}

/// Runs one random message sequence and returns, for every accepted message,
/// the ledger state after it.
pub fn random_gamma_run(rng: &mut ChaCha8Rng, params: &Params, len: usize) -> Vec<GammaState> {
    let mut g = GammaState::new(params);
    let mut reg = SigRegistry::new();
    let mut now = 0;
    let mut accepted = Vec::new();
    for _ in 0..len {
        now += rng.gen_range(0..3);
        let msg = random_msg(rng, &g, &mut reg);
        let (next, ev) = g.process_msg(&reg, &msg, now, params, PartyId::B);
        match ev {
            GammaEvent::Accepted { .. } => {
                g = next;
                accepted.push(g.clone());
            }
            GammaEvent::Rejected { .. } => assert_eq!(next, g),
        }
    }
    accepted
}

pub fn conserved(g: &GammaState, params: &Params) -> bool {
    g.accounted_coins() == g.issued_coins(params)
}
