//! Seeded random adversary.
//!
//! Payloads come from a grammar: faithful replies produced by a mirror state
//! machine playing the counterparty, stale replays of earlier messages, and
//! mutated variants of splits seen so far. Each game owns a ChaCha stream
//! derived from `(seed, game index)`, so parallel and serial campaigns agree.

use std::collections::{BTreeMap, VecDeque};

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::driver::Driver;
use super::{replay, GameTrace, TraceHeader};
use crate::game::{check, GameConfig, GameState, Move, PartyMutation};
use crate::gamma::{ChannelState, GammaMsg, Split, TransferDest};
use crate::params::{Amount, Params, PartyId};
use crate::party::{EnvOrder, PartyInput, PartyMsg, Phase};
use crate::sigfun::SignableMessage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MoveKind {
    SignMsg,
    SendMsgToGamma,
    DeliverMsgToGamma,
    IncrementTime,
    SendMsgToParty,
    ControlEnvironment,
}

impl MoveKind {
    pub const ALL: [MoveKind; 6] = [
        MoveKind::SignMsg,
        MoveKind::SendMsgToGamma,
        MoveKind::DeliverMsgToGamma,
        MoveKind::IncrementTime,
        MoveKind::SendMsgToParty,
        MoveKind::ControlEnvironment,
    ];
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FuzzConfig {
    pub seed: u64,
    pub max_steps: usize,
    pub move_weights: BTreeMap<MoveKind, u32>,
    pub games_count: usize,
    #[serde(default)]
    pub party_mutation: Option<PartyMutation>,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            seed: 1,
            max_steps: 200,
            move_weights: BTreeMap::from([
                (MoveKind::SendMsgToParty, 30),
                (MoveKind::ControlEnvironment, 25),
                (MoveKind::IncrementTime, 25),
                (MoveKind::DeliverMsgToGamma, 12),
                (MoveKind::SendMsgToGamma, 5),
                (MoveKind::SignMsg, 3),
            ]),
            games_count: 100,
            party_mutation: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuzzViolation {
    pub game: usize,
    pub step: usize,
    pub checks: Vec<String>,
    /// The game up to and including the violating step.
    pub trace: GameTrace,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FuzzReport {
    pub seed: u64,
    pub games: usize,
    pub total_steps: usize,
    /// Games that ever opened a ledger channel.
    pub channels_opened: usize,
    /// Games where a dispute reached the ledger.
    pub disputes: usize,
    /// Games where the honest party moved past its first commitment.
    pub offchain_updates: usize,
    /// Games where an honest revocation was accepted by the ledger.
    pub punishments: usize,
    /// Games in which a close was ordered and the closing window elapsed.
    pub closes_completed: usize,
    /// Violations by check id.
    pub violation_counts: BTreeMap<String, usize>,
    /// Party steps where `evaluate - expectedFunds` fell, which the
    /// in-flight-adjusted monotonicity hook does not count.
    pub literal_party_decreases: usize,
    #[serde(skip)]
    pub violations: Vec<FuzzViolation>,
}

impl FuzzReport {
    pub fn violation_games(&self) -> usize {
        self.violations.len()
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

struct GameOutcome {
    steps: usize,
    opened: bool,
    disputed: bool,
    updated: bool,
    punished: bool,
    closed_window: bool,
    literal: usize,
    violation: Option<FuzzViolation>,
}

/// Runs `cfg.games_count` games. Identical inputs give identical reports.
pub fn fuzz(cfg: &FuzzConfig, params: &Params) -> FuzzReport {
    let outcomes: Vec<GameOutcome> = (0..cfg.games_count)
        .into_par_iter()
        .map(|i| run_game(cfg, params, i))
        .collect();
    let mut report = FuzzReport {
        seed: cfg.seed,
        games: cfg.games_count,
        ..FuzzReport::default()
    };
    for o in outcomes {
        report.total_steps += o.steps;
        report.channels_opened += o.opened as usize;
        report.disputes += o.disputed as usize;
        report.offchain_updates += o.updated as usize;
        report.punishments += o.punished as usize;
        report.closes_completed += o.closed_window as usize;
        report.literal_party_decreases += o.literal;
        if let Some(v) = o.violation {
            for c in &v.checks {
                *report.violation_counts.entry(c.clone()).or_default() += 1;
            }
            report.violations.push(v);
        }
    }
    report
}

fn start(cfg: &FuzzConfig, params: &Params, index: usize) -> (Fuzzer, TraceHeader) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let config = GameConfig {
        party_mutation: cfg.party_mutation,
        ..GameConfig::default()
    };
    let header = TraceHeader {
        name: format!("fuzz-{}-{}", cfg.seed, index),
        params: params.clone(),
        honest: PartyId::A,
        config: config.clone(),
    };
    let game =
        GameState::new(params.clone(), PartyId::A, config).expect("params validated by caller");
    let f = Fuzzer::new(Driver::new(game), rng, &cfg.move_weights, cfg.max_steps);
    (f, header)
}

/// Full trace of game `index` of a campaign, up to its first violation.
pub fn fuzz_game(cfg: &FuzzConfig, params: &Params, index: usize) -> GameTrace {
    let (mut f, header) = start(cfg, params, index);
    while f.d.moves.len() < cfg.max_steps && f.d.reports.iter().all(|r| r.checks.ok) {
        f.step();
    }
    let end =
        f.d.reports
            .iter()
            .position(|r| !r.checks.ok)
            .map_or(f.d.moves.len(), |i| i + 1);
    replay(&header, &f.d.moves[..end]).expect("recorded moves replay")
}

fn run_game(cfg: &FuzzConfig, params: &Params, index: usize) -> GameOutcome {
    let (mut f, header) = start(cfg, params, index);
    let mut outcome = GameOutcome {
        steps: 0,
        opened: false,
        disputed: false,
        updated: false,
        punished: false,
        closed_window: false,
        literal: 0,
        violation: None,
    };
    while f.d.moves.len() < cfg.max_steps {
        let before = f.d.reports.len();
        f.step();
        for r in &f.d.reports[before..] {
            outcome.punished |= r
                .gamma_events
                .iter()
                .any(|e| e.is_accepted() && *e.msg() == GammaMsg::Revoke { sender: PartyId::A });
            outcome.literal += r
                .advisories
                .iter()
                .filter(|a| *a == check::MONO_PARTY_LITERAL)
                .count();
        }
        let g = &f.d.game;
        outcome.opened |= !matches!(g.gamma.channel, ChannelState::NoChannel);
        outcome.disputed |= matches!(g.gamma.channel, ChannelState::DisputeOpen { .. });
        outcome.updated |= g.party.best_split_received.is_some_and(|b| b.version > 0);
        if let Some((i, r)) = f.d.reports[before..]
            .iter()
            .enumerate()
            .find(|(_, r)| !r.checks.ok)
        {
            let upto = before + i + 1;
            let trace = replay(&header, &f.d.moves[..upto]).expect("recorded moves replay");
            outcome.violation = Some(FuzzViolation {
                game: index,
                step: upto - 1,
                checks: r.checks.violations.clone(),
                trace,
            });
            break;
        }
    }
    let g = &f.d.game;
    outcome.closed_window = g
        .close_time
        .is_some_and(|t| g.now >= t + g.params.channel_closing_time);
    outcome.steps = f.d.moves.len();
    outcome
}

struct Fuzzer {
    d: Driver,
    rng: ChaCha8Rng,
    kinds: Vec<MoveKind>,
    weights: WeightedIndex<u32>,
    /// Mirror replies not yet handed to the honest party.
    outbox: VecDeque<PartyMsg>,
    /// Ledger messages the mirror wants published.
    mirror_gamma: VecDeque<GammaMsg>,
    /// Every message ever sent to the honest party.
    sent: Vec<PartyMsg>,
    /// Every honest ledger message ever queued.
    honest_gamma: Vec<GammaMsg>,
    adv_seq: u64,
    /// Hard cap on recorded moves.
    budget: usize,
}

impl Fuzzer {
    fn new(d: Driver, rng: ChaCha8Rng, weights: &BTreeMap<MoveKind, u32>, budget: usize) -> Self {
        let kinds: Vec<MoveKind> = MoveKind::ALL.to_vec();
        let w: Vec<u32> = kinds
            .iter()
            .map(|k| weights.get(k).copied().unwrap_or(0))
            .collect();
        let weights = WeightedIndex::new(w).expect("at least one positive weight");
        Fuzzer {
            d,
            rng,
            kinds,
            weights,
            outbox: VecDeque::new(),
            mirror_gamma: VecDeque::new(),
            sent: Vec::new(),
            honest_gamma: Vec::new(),
            adv_seq: 0,
            budget,
        }
    }

    fn adv(&self) -> PartyId {
        self.d.game.corrupted()
    }

    fn exhausted(&self) -> bool {
        self.d.moves.len() >= self.budget
    }

    fn play(&mut self, m: Move) {
        if self.exhausted() || !self.d.game.move_applicable(&m) {
            return;
        }
        if let Move::SendMsgToParty { msg } = &m {
            self.sent.push(msg.clone());
        }
        let queued_before = self.d.game.queue.len();
        self.d.play(m).expect("applicability checked");
        let q = &self.d.game.queue;
        if q.len() > queued_before {
            let fresh: Vec<GammaMsg> = q[queued_before..].iter().map(|x| x.msg.clone()).collect();
            self.honest_gamma.extend(fresh);
        }
    }

    fn step(&mut self) {
        let kind = self.kinds[self.weights.sample(&mut self.rng)];
        match kind {
            MoveKind::SignMsg => {
                let msgs = (0..self.rng.gen_range(1..=2))
                    .map(|_| self.random_signable())
                    .collect();
                self.play(Move::SignMsg { msgs });
            }
            MoveKind::SendMsgToGamma => self.send_to_gamma(),
            MoveKind::DeliverMsgToGamma => {
                let n = self.d.game.queue.len();
                if n == 0 {
                    self.increment_time();
                } else {
                    let index = self.rng.gen_range(0..n);
                    self.play(Move::DeliverMsgToGamma { index });
                }
            }
            MoveKind::IncrementTime => self.increment_time(),
            MoveKind::SendMsgToParty => self.send_to_party(),
            MoveKind::ControlEnvironment => self.control_env(),
        }
    }

    fn increment_time(&mut self) {
        let g = &self.d.game;
        if g.move_applicable(&Move::IncrementTime) {
            return self.play(Move::IncrementTime);
        }
        let next = g.now + 1;
        let dn = g.params.delta_net;
        let due = g.queue.iter().position(|q| next - q.sent_at > dn);
        match due {
            Some(index) => self.play(Move::DeliverMsgToGamma { index }),
            None => self.play(Move::ControlEnvironment {
                order: EnvOrder::JustCheckGamma,
            }),
        }
    }

    fn control_env(&mut self) {
        let g = &self.d.game;
        let pkh = g.gamma.pkh[g.honest];
        let my = match g.party.phase {
            Phase::ChannelOpen { my_balance, .. } => my_balance,
            _ => 0,
        };
        let order = match self.rng.gen_range(0..10) {
            0 | 1 => EnvOrder::EnvOpenChannel {
                amount: self.amount_upto(pkh),
            },
            2..=4 => EnvOrder::PayOffChain {
                amount: self.amount_upto(my),
            },
            5 => EnvOrder::PayOnChain {
                amount: self.amount_upto(pkh),
            },
            6 => EnvOrder::CloseNow,
            _ => EnvOrder::JustCheckGamma,
        };
        let m = Move::ControlEnvironment { order };
        if self.d.game.move_applicable(&m) {
            self.play(m);
        } else {
            self.play(Move::ControlEnvironment {
                order: EnvOrder::JustCheckGamma,
            });
        }
    }

    fn amount_upto(&mut self, max: Amount) -> Amount {
        if max == 0 {
            1
        } else {
            self.rng.gen_range(1..=max)
        }
    }

    /// Runs the mirror on `input`; its outputs are stored, not yet sent.
    fn run_mirror(&mut self, input: PartyInput) {
        if self.exhausted() {
            return;
        }
        match self.d.mirror_step(input) {
            Ok((to_gamma, to_party)) => {
                self.mirror_gamma.extend(to_gamma);
                self.outbox.extend(to_party);
            }
            Err(e) => unreachable!("signing is always applicable: {e}"),
        }
    }

    fn send_to_party(&mut self) {
        let roll = self.rng.gen_range(0..100);
        if roll < 70 {
            self.faithful_reply();
        } else if roll < 85 && !self.sent.is_empty() {
            let i = self.rng.gen_range(0..self.sent.len());
            let msg = self.sent[i].clone();
            self.play(Move::SendMsgToParty { msg });
        } else {
            let msg = self.random_party_msg();
            self.play(Move::SendMsgToParty { msg });
        }
    }

    fn faithful_reply(&mut self) {
        while self.outbox.is_empty() {
            match self.d.inbox.pop_front() {
                Some(m) => self.run_mirror(PartyInput::Msg(m)),
                None => break,
            }
        }
        if self.outbox.is_empty() {
            // Nothing to answer: let the counterparty take the initiative.
            let mirror_my = match self.d.mirror.phase {
                Phase::ChannelOpen { my_balance, .. } => my_balance,
                _ => 0,
            };
            let pkh = self.d.game.gamma.pkh[self.adv()];
            let order = match self.rng.gen_range(0..6) {
                0 => EnvOrder::EnvOpenChannel {
                    amount: self.amount_upto(pkh),
                },
                1 | 2 => EnvOrder::PayOffChain {
                    amount: self.amount_upto(mirror_my),
                },
                3 => EnvOrder::CloseNow,
                _ => EnvOrder::JustCheckGamma,
            };
            self.run_mirror(PartyInput::Env(order));
        }
        if let Some(msg) = self.outbox.pop_front() {
            self.play(Move::SendMsgToParty { msg });
        }
    }

    fn send_to_gamma(&mut self) {
        let adv = self.adv();
        let roll = self.rng.gen_range(0..100);
        let msg = if roll < 35 && !self.mirror_gamma.is_empty() {
            self.mirror_gamma.pop_front().expect("non-empty")
        } else if roll < 55 {
            // Publish some split the honest party signed, signing it ourselves.
            let splits: Vec<Split> = self
                .d
                .game
                .reg
                .signed_splits_by(self.d.game.honest)
                .copied()
                .collect();
            if splits.is_empty() {
                GammaMsg::ClaimAfterTimeout { sender: adv }
            } else {
                let s = splits[self.rng.gen_range(0..splits.len())];
                self.play(Move::SignMsg {
                    msgs: vec![SignableMessage::CommitSig { split: s }],
                });
                GammaMsg::OpenDispute {
                    split: s,
                    sender: adv,
                }
            }
        } else if roll < 65 {
            GammaMsg::ClaimAfterTimeout { sender: adv }
        } else if roll < 72 {
            GammaMsg::Revoke { sender: adv }
        } else if roll < 82 && !self.honest_gamma.is_empty() {
            let i = self.rng.gen_range(0..self.honest_gamma.len());
            self.honest_gamma[i].clone()
        } else if roll < 92 {
            let dest = [
                TransferDest::OtherParty,
                TransferDest::Channel,
                TransferDest::Burn,
            ][self.rng.gen_range(0..3)];
            let pkh = self.d.game.gamma.pkh[adv];
            let amount = self.rng.gen_range(0..=pkh.max(1));
            let seq = if self.rng.gen_bool(0.8) {
                self.d.game.gamma.next_seq[adv]
            } else {
                self.adv_seq
            };
            self.adv_seq += 1;
            self.play(Move::SignMsg {
                msgs: vec![SignableMessage::OnChainTransfer {
                    from: adv,
                    dest,
                    amount,
                    seq,
                }],
            });
            GammaMsg::MoveOwnCoins {
                from: adv,
                dest,
                amount,
                seq,
            }
        } else {
            GammaMsg::AdversaryMint {
                amount: self.rng.gen_range(1..=5),
            }
        };
        self.play(Move::SendMsgToGamma { msg });
    }

    /// A split related to ones already in play.
    fn random_split(&mut self) -> Split {
        let mut pool: Vec<Split> = self
            .d
            .game
            .reg
            .iter()
            .filter_map(|(_, m)| match m {
                SignableMessage::CommitSig { split } => Some(*split),
                _ => None,
            })
            .collect();
        pool.extend(self.d.game.party.best_split_received);
        let cap = match self.d.game.gamma.channel {
            ChannelState::Open { capacity, .. } => capacity,
            _ => 10,
        };
        let mut s = if pool.is_empty() || self.rng.gen_bool(0.2) {
            let c = self.rng.gen_range(0..=cap);
            Split {
                version: self.rng.gen_range(0..4),
                cond_party: if self.rng.gen_bool(0.5) {
                    PartyId::A
                } else {
                    PartyId::B
                },
                cond_amount: c,
                uncond_amount: cap - c,
            }
        } else {
            pool[self.rng.gen_range(0..pool.len())]
        };
        match self.rng.gen_range(0..6) {
            0 => s.version += 1,
            1 => s.version = s.version.saturating_sub(1),
            2 => s.cond_party = s.cond_party.counterparty(),
            3 if s.cond_amount > 0 => {
                s.cond_amount -= 1;
                s.uncond_amount += 1;
            }
            4 if s.uncond_amount > 0 => {
                s.uncond_amount -= 1;
                s.cond_amount += 1;
            }
            _ => {}
        }
        s
    }

    fn random_signable(&mut self) -> SignableMessage {
        let adv = self.adv();
        match self.rng.gen_range(0..3) {
            0 => SignableMessage::CommitSig {
                split: self.random_split(),
            },
            1 => SignableMessage::Revocation {
                version: self.rng.gen_range(0..4),
                cond_party: adv,
            },
            _ => SignableMessage::OnChainTransfer {
                from: adv,
                dest: TransferDest::OtherParty,
                amount: self.rng.gen_range(0..=5),
                seq: self.d.game.gamma.next_seq[adv],
            },
        }
    }

    fn random_party_msg(&mut self) -> PartyMsg {
        let amount = self.rng.gen_range(0..=12);
        let v = self.rng.gen_range(0..4);
        match self.rng.gen_range(0..10) {
            0 => PartyMsg::OpenChannel { amount },
            1 => PartyMsg::AcceptChannel { amount },
            2 => PartyMsg::FundingCreated {
                split: self.random_split(),
            },
            3 => PartyMsg::CommitmentSigned {
                split: self.random_split(),
            },
            4 => PartyMsg::ChannelReadyByFunder,
            5 => PartyMsg::ChannelReadyByFundee,
            6 => PartyMsg::Initializer { amount },
            7 => PartyMsg::Commit {
                split: self.random_split(),
            },
            8 => PartyMsg::CommitAndRevokeAndAck {
                split: self.random_split(),
                revoked_version: v,
            },
            _ => PartyMsg::RevokeAndAck { revoked_version: v },
        }
    }
}
