mod common;

use std::collections::{BTreeSet, HashSet};

use channel_arena::adversaries::fuzz_game;
use channel_arena::interface::{good_transition, ChannelInfo, PreSystem};
use channel_arena::{
    fuzz, ChannelState, Effects, FuzzConfig, GameConfig, GameState, GammaMsg, Params, PartyId,
    SigRegistry, SignableMessage, SimpleParty, Split, TimingContext,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn evaluator_never_exceeds_extractable_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 0..1000 {
        let inst = common::random_instance(&mut rng);
        let ev = inst.evaluate().unwrap();
        let ex = inst.extractable().unwrap() as i128;
        assert!(ev <= ex, "instance {n}: {ev} > {ex}\n{inst:?}");
    }
}

#[test]
fn ledger_conserves_coins() {
    let params = Params::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut accepted = 0;
    let mut lifecycle = HashSet::new();
    for _ in 0..1000 {
        let states = common::random_gamma_run(&mut rng, &params, 30);
        for g in &states {
            assert!(common::conserved(g, &params), "{g:?}");
            lifecycle.insert(std::mem::discriminant(&g.channel));
        }
        accepted += states.len();
    }
    assert!(accepted > 5000, "only {accepted} accepted messages");
    // The generator reaches every channel state.
    assert_eq!(lifecycle.len(), 4);
}

/// Every honest signature in the registry was produced by an honest step.
#[test]
fn registry_has_no_forged_honest_signatures() {
    let cfg = FuzzConfig {
        games_count: 200,
        ..FuzzConfig::default()
    };
    let params = Params::default();
    for i in 0..cfg.games_count {
        let trace = fuzz_game(&cfg, &params, i);
        let mut g = GameState::new(params.clone(), PartyId::A, GameConfig::default()).unwrap();
        let mut produced = BTreeSet::new();
        for m in trace.moves() {
            let (next, report) = g.apply_move(&m).unwrap();
            if let Some(fx) = &report.party_effects {
                produced.extend(fx.signatures_added.iter().cloned());
            }
            for entry in next.reg.iter().filter(|(p, _)| *p == PartyId::A) {
                assert!(produced.contains(entry), "game {i}: forged {entry:?}");
            }
            g = next;
        }
    }
}

/// A queued ledger message is never older than `deltaNet`.
#[test]
fn queued_messages_are_delivered_in_time() {
    let cfg = FuzzConfig {
        games_count: 200,
        ..FuzzConfig::default()
    };
    let params = Params::default();
    for i in 0..cfg.games_count {
        let trace = fuzz_game(&cfg, &params, i);
        let mut g = GameState::new(params.clone(), PartyId::A, GameConfig::default()).unwrap();
        for m in trace.moves() {
            g = g.apply_move(&m).unwrap().0;
            for q in &g.queue {
                assert!(
                    g.now <= q.sent_at + params.delta_net,
                    "game {i}: {q:?} at {}",
                    g.now
                );
            }
        }
    }
}

#[test]
fn serial_and_parallel_campaigns_agree() {
    let cfg = FuzzConfig {
        games_count: 200,
        ..FuzzConfig::default()
    };
    let params = Params::default();
    let parallel = fuzz(&cfg, &params);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let serial = pool.install(|| fuzz(&cfg, &params));
    assert_eq!(parallel.summary_json(), serial.summary_json());
    assert_eq!(parallel, serial);
}

#[test]
fn campaign_game_matches_standalone_game() {
    let cfg = FuzzConfig {
        games_count: 50,
        party_mutation: Some(channel_arena::PartyMutation::DisableRevocationDuty),
        ..FuzzConfig::default()
    };
    let params = Params::default();
    let report = fuzz(&cfg, &params);
    for v in &report.violations {
        assert_eq!(
            fuzz_game(&cfg, &params, v.game).to_jsonl(),
            v.trace.to_jsonl()
        );
    }
}

fn split(version: u64, cond_party: PartyId, cond_amount: u64) -> Split {
    Split {
        version,
        cond_party,
        cond_amount,
        uncond_amount: 6 - cond_amount,
    }
}

fn arb_split() -> impl Strategy<Value = Split> {
    (0u64..3, prop::bool::ANY, 0u64..=6)
        .prop_map(|(v, a, c)| split(v, if a { PartyId::A } else { PartyId::B }, c))
}

fn arb_party() -> impl Strategy<Value = SimpleParty> {
    (
        prop::option::of(arb_split()),
        prop::collection::vec(arb_split(), 0..3),
        0u64..=6,
    )
        .prop_map(|(best, revs, ext)| SimpleParty {
            on_chain_balance: 14,
            channel_balance_ext: ext,
            closing_channel: false,
            channel_info: ChannelInfo {
                record_owner: PartyId::A,
                best_split_received: best,
                received_revocations: revs,
            },
        })
}

/// A successor that keeps the clauses a real step can satisfy most of the
/// time: revocations only grow and a tracked channel stays tracked.
fn successor(s: SimpleParty) -> impl Strategy<Value = SimpleParty> {
    (
        prop::option::of(arb_split()),
        prop::collection::vec(arb_split(), 0..2),
        prop::option::of(0u64..=6),
    )
        .prop_map(move |(best, extra, ext)| {
            let mut next = s.clone();
            if best.is_some() {
                next.channel_info.best_split_received = best;
            }
            next.channel_info.received_revocations.extend(extra);
            if let Some(e) = ext {
                next.channel_balance_ext = e;
            }
            next
        })
}

fn arb_chain() -> impl Strategy<Value = (SimpleParty, SimpleParty, SimpleParty)> {
    arb_party()
        .prop_flat_map(|s0| (Just(s0.clone()), successor(s0)))
        .prop_flat_map(|(s0, s1)| (Just(s0), Just(s1.clone()), successor(s1)))
}

fn arb_effects() -> impl Strategy<Value = Effects> {
    (
        prop::bool::ANY,
        prop::option::of((0u64..3, prop::bool::ANY)),
    )
        .prop_map(|(revoke, sig)| Effects {
            msgs_to_gamma: if revoke {
                vec![GammaMsg::Revoke { sender: PartyId::A }]
            } else {
                vec![]
            },
            signatures_added: sig
                .map(|(version, a)| {
                    let cond_party = if a { PartyId::A } else { PartyId::B };
                    vec![(
                        cond_party,
                        SignableMessage::Revocation {
                            version,
                            cond_party,
                        },
                    )]
                })
                .into_iter()
                .flatten()
                .collect(),
            ..Effects::default()
        })
}

fn arb_channel() -> impl Strategy<Value = ChannelState> {
    prop_oneof![
        Just(ChannelState::NoChannel),
        Just(ChannelState::Open {
            capacity: 6,
            funder: PartyId::A
        }),
        arb_split().prop_map(|split| ChannelState::DisputeOpen {
            split,
            opened_at: 4,
            deadline: 10
        }),
        Just(ChannelState::Closed),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, max_global_rejects: 200_000, ..ProptestConfig::default() })]

    #[test]
    fn good_transition_composes(
        (s0, s1, s2) in arb_chain(),
        e1 in arb_effects(),
        e2 in arb_effects(),
        channel in arb_channel(),
        last_activation in 0u64..6,
    ) {
        let params = Params::default();
        let gamma = channel_arena::GammaState {
            channel,
            ..channel_arena::GammaState::new(&params)
        };
        let reg = SigRegistry::new();
        let timing = TimingContext { now: 6, last_activation, queued_revoke_at: None, params };
        let sys = || PreSystem { gamma: &gamma, reg: &reg, timing: &timing };
        let first = good_transition(&s0, &s1, sys(), &e1);
        let second = good_transition(&s1, &s2, sys(), &e2);
        prop_assume!(first.ok && second.ok);
        let composite = good_transition(&s0, &s2, sys(), &e1.clone().then(&e2));
        prop_assert!(composite.ok, "{:?}", composite.violations);
    }
}
