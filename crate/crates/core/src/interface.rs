//! The party-agnostic view of an honest party and the predicates any correct
//! implementation has to satisfy, evaluated at run time.

use serde::{Deserialize, Serialize};

use crate::evaluator::TimingContext;
use crate::gamma::{ChannelState, GammaMsg, GammaState, Split};
use crate::params::{Amount, PartyId};
use crate::party::Effects;
use crate::sigfun::{SigRegistry, SignableMessage};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChannelInfo {
    pub record_owner: PartyId,
    pub best_split_received: Option<Split>,
    pub received_revocations: Vec<Split>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimpleParty {
    pub on_chain_balance: Amount,
    /// What the party believes it owns in the channel.
    pub channel_balance_ext: Amount,
    pub closing_channel: bool,
    pub channel_info: ChannelInfo,
}

impl SimpleParty {
    fn owner(&self) -> PartyId {
        self.channel_info.record_owner
    }

    fn holds_revocation_for(&self, version: u64, cond_party: PartyId) -> bool {
        self.channel_info
            .received_revocations
            .iter()
            .any(|r| r.id() == (version, cond_party))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub ok: bool,
    pub violations: Vec<String>,
}

impl CheckResult {
    pub fn pass() -> Self {
        CheckResult {
            ok: true,
            violations: Vec::new(),
        }
    }

    pub fn from_violations(violations: Vec<String>) -> Self {
        CheckResult {
            ok: violations.is_empty(),
            violations,
        }
    }

    pub fn merge(mut self, other: CheckResult) -> Self {
        self.violations.extend(other.violations);
        self.ok = self.violations.is_empty();
        self
    }
}

/// Conditional amount of the best received split, or 0.
pub fn balance_our(sp: &SimpleParty) -> Amount {
    sp.channel_info
        .best_split_received
        .map_or(0, |s| s.cond_amount)
}

pub fn good_simple_party(sp: &SimpleParty, reg: &SigRegistry) -> CheckResult {
    let owner = sp.owner();
    let cp = owner.counterparty();
    let ours = balance_our(sp);
    let mut v = Vec::new();

    if sp.channel_balance_ext > ours {
        v.push("GSP-1".to_string());
    }

    if sp
        .channel_info
        .received_revocations
        .iter()
        .any(|r| r.cond_party != cp || !reg.has_revocation(r.cond_party, r.version, r.cond_party))
    {
        v.push("GSP-2".to_string());
    }

    if let Some(b) = sp.channel_info.best_split_received {
        if b.cond_party != owner
            || reg.has_revocation(owner, b.version, b.cond_party)
            || !reg.has_commit_sig(cp, &b)
        {
            v.push("GSP-3".to_string());
        }
    }

    let unsafe_signed = reg.signed_splits_by(owner).any(|s| {
        let revoked_by_us = sp.holds_revocation_for(s.version, s.cond_party);
        let uncond_ok = s.uncond_party() == owner && s.uncond_amount >= ours;
        let cond_ok = s.cond_party == owner
            && !reg.has_revocation(owner, s.version, owner)
            && s.cond_amount >= ours;
        !(revoked_by_us || uncond_ok || cond_ok)
    });
    if unsafe_signed {
        v.push("GSP-4".to_string());
    }

    CheckResult::from_violations(v)
}

/// Ledger and timing context of the transition, taken before the step.
#[derive(Clone, Copy, Debug)]
pub struct PreSystem<'a> {
    pub gamma: &'a GammaState,
    pub reg: &'a SigRegistry,
    pub timing: &'a TimingContext,
}

pub fn good_transition(
    pre: &SimpleParty,
    post: &SimpleParty,
    sys: PreSystem<'_>,
    effects: &Effects,
) -> CheckResult {
    let mut v = Vec::new();
    let owner = pre.owner();

    if post.owner() != owner {
        v.push("GT-1".to_string());
    }

    if let Some(before) = pre.channel_info.best_split_received {
        match post.channel_info.best_split_received {
            Some(after) if after.capacity() == before.capacity() => {}
            _ => v.push("GT-2".to_string()),
        }
    }

    if !pre
        .channel_info
        .received_revocations
        .iter()
        .all(|r| post.channel_info.received_revocations.contains(r))
    {
        v.push("GT-3".to_string());
    }

    if let ChannelState::DisputeOpen {
        split, deadline, ..
    } = sys.gamma.channel
    {
        if effects
            .signatures_added
            .iter()
            .any(|(_, m)| matches!(m, SignableMessage::Revocation { .. }))
        {
            v.push("GT-4".to_string());
        }
        let holds = pre.channel_info.received_revocations.contains(&split);
        if holds && sys.timing.guaranteed_delivery_time() < deadline {
            let sent = effects
                .msgs_to_gamma
                .contains(&GammaMsg::Revoke { sender: owner });
            if !sent {
                v.push("GT-5".to_string());
            }
        }
    }

    let normal = sys.gamma.channel.is_normal();
    let pre_tracks = pre.channel_info.best_split_received.is_some();
    let post_tracks = post.channel_info.best_split_received.is_some();
    let started = !pre_tracks && post_tracks && normal;
    let both = pre_tracks && post_tracks && normal;
    if !(started || both || balance_our(pre) == balance_our(post)) {
        v.push("GT-6".to_string());
    }

    // A party step never touches the ledger; its on-chain balance may only
    // move through later ledger events.
    if pre.on_chain_balance != post.on_chain_balance {
        v.push("GT-ACCT".to_string());
    }

    CheckResult::from_violations(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Params;
    use crate::params::PartyId::{A, B};
    use proptest::prelude::*;

    fn split(v: u64, cp: PartyId, c: Amount, u: Amount) -> Split {
        Split {
            version: v,
            cond_party: cp,
            cond_amount: c,
            uncond_amount: u,
        }
    }

    fn party(best: Option<Split>, revs: Vec<Split>) -> SimpleParty {
        SimpleParty {
            on_chain_balance: 10,
            channel_balance_ext: best.map_or(0, |b| b.cond_amount),
            closing_channel: false,
            channel_info: ChannelInfo {
                record_owner: A,
                best_split_received: best,
                received_revocations: revs,
            },
        }
    }

    #[test]
    fn balance_our_cases() {
        assert_eq!(balance_our(&party(None, vec![])), 0);
        let sp = party(Some(split(1, A, 7, 3)), vec![]);
        assert_eq!(balance_our(&sp), 7);
        let with_rev = party(Some(split(1, A, 7, 3)), vec![split(0, B, 0, 10)]);
        assert_eq!(balance_our(&with_rev), 7);
    }

    #[test]
    fn fresh_party_is_good() {
        assert!(good_simple_party(&party(None, vec![]), &SigRegistry::new()).ok);
    }

    /// Hand-built: A holds its own v0 with cond 5 and has signed B's v0.
    fn signed_state(uncond_for_a: Amount) -> (SimpleParty, SigRegistry) {
        let best = split(0, A, 5, 5);
        let theirs = split(0, B, 10 - uncond_for_a, uncond_for_a);
        let mut reg = SigRegistry::new();
        reg.sign(B, SignableMessage::CommitSig { split: best });
        reg.sign(A, SignableMessage::CommitSig { split: theirs });
        (party(Some(best), vec![]), reg)
    }

    #[test]
    fn gsp4_uncond_covers_balance() {
        let (sp, reg) = signed_state(5);
        assert_eq!(good_simple_party(&sp, &reg), CheckResult::pass());
    }

    #[test]
    fn gsp4_uncond_short_by_one() {
        let (sp, reg) = signed_state(4);
        let r = good_simple_party(&sp, &reg);
        assert_eq!(r.violations, vec!["GSP-4".to_string()]);
    }

    #[test]
    fn gsp1_overclaim() {
        let (mut sp, reg) = signed_state(5);
        sp.channel_balance_ext = 6;
        assert_eq!(good_simple_party(&sp, &reg).violations, vec!["GSP-1"]);
    }

    #[test]
    fn gsp2_unsigned_revocation() {
        let (mut sp, reg) = signed_state(5);
        sp.channel_info.received_revocations.push(split(0, B, 5, 5));
        assert_eq!(good_simple_party(&sp, &reg).violations, vec!["GSP-2"]);
    }

    #[test]
    fn gsp3_self_revoked_best() {
        let (sp, mut reg) = signed_state(5);
        reg.sign(
            A,
            SignableMessage::Revocation {
                version: 0,
                cond_party: A,
            },
        );
        assert!(good_simple_party(&sp, &reg)
            .violations
            .contains(&"GSP-3".to_string()));
    }

    fn timing(now: u64) -> TimingContext {
        TimingContext {
            now,
            last_activation: now,
            queued_revoke_at: None,
            params: Params::default(),
        }
    }

    #[test]
    fn dropping_a_revocation_breaks_gt3() {
        let rev = split(0, B, 0, 10);
        let pre = party(Some(split(1, A, 5, 5)), vec![rev]);
        let post = party(Some(split(1, A, 5, 5)), vec![]);
        let g = GammaState::new(&Params::default());
        let reg = SigRegistry::new();
        let t = timing(0);
        let sys = PreSystem {
            gamma: &g,
            reg: &reg,
            timing: &t,
        };
        let r = good_transition(&pre, &post, sys, &Effects::default());
        assert_eq!(r.violations, vec!["GT-3"]);
    }

    #[test]
    fn revoke_duty_enforced_in_dispute() {
        let rev = split(0, B, 0, 10);
        let sp = party(Some(split(1, A, 5, 5)), vec![rev]);
        let mut g = GammaState::new(&Params::default());
        g.channel = ChannelState::DisputeOpen {
            split: rev,
            opened_at: 4,
            deadline: 10,
        };
        let reg = SigRegistry::new();
        let t = timing(4);
        let sys = PreSystem {
            gamma: &g,
            reg: &reg,
            timing: &t,
        };
        let silent = good_transition(&sp, &sp, sys, &Effects::default());
        assert_eq!(silent.violations, vec!["GT-5"]);
        let fx = Effects {
            msgs_to_gamma: vec![GammaMsg::Revoke { sender: A }],
            ..Effects::default()
        };
        assert!(good_transition(&sp, &sp, sys, &fx).ok);
    }

    #[test]
    fn no_new_revocations_during_dispute() {
        let sp = party(Some(split(1, A, 5, 5)), vec![]);
        let mut g = GammaState::new(&Params::default());
        g.channel = ChannelState::DisputeOpen {
            split: split(1, A, 5, 5),
            opened_at: 4,
            deadline: 10,
        };
        let reg = SigRegistry::new();
        let t = timing(4);
        let fx = Effects {
            signatures_added: vec![(
                A,
                SignableMessage::Revocation {
                    version: 1,
                    cond_party: A,
                },
            )],
            ..Effects::default()
        };
        let sys = PreSystem {
            gamma: &g,
            reg: &reg,
            timing: &t,
        };
        assert_eq!(good_transition(&sp, &sp, sys, &fx).violations, vec!["GT-4"]);
    }

    #[test]
    fn payment_in_normal_state_passes_gt6() {
        let pre = party(Some(split(0, A, 10, 0)), vec![]);
        let post = party(Some(split(1, A, 5, 5)), vec![]);
        let mut g = GammaState::new(&Params::default());
        g.channel = ChannelState::Open {
            capacity: 10,
            funder: A,
        };
        let reg = SigRegistry::new();
        let t = timing(3);
        let sys = PreSystem {
            gamma: &g,
            reg: &reg,
            timing: &t,
        };
        assert!(good_transition(&pre, &post, sys, &Effects::default()).ok);
        g.channel = ChannelState::DisputeOpen {
            split: split(0, A, 10, 0),
            opened_at: 1,
            deadline: 7,
        };
        let sys = PreSystem {
            gamma: &g,
            reg: &reg,
            timing: &t,
        };
        assert_eq!(
            good_transition(&pre, &post, sys, &Effects::default()).violations,
            vec!["GT-6"]
        );
    }

    fn arb_split() -> impl Strategy<Value = Split> {
        (0u64..4, prop_oneof![Just(A), Just(B)], 0u64..=10)
            .prop_map(|(v, cp, c)| split(v, cp, c, 10 - c))
    }

    proptest! {
        #[test]
        fn adding_revocations_keeps_gsp_ok(
            best in proptest::option::of(arb_split()),
            signed in proptest::collection::vec(arb_split(), 0..5),
            extra in arb_split(),
        ) {
            let mut reg = SigRegistry::new();
            for s in &signed {
                reg.sign(A, SignableMessage::CommitSig { split: *s });
            }
            if let Some(b) = best {
                reg.sign(B, SignableMessage::CommitSig { split: b });
            }
            let sp = party(best.filter(|b| b.cond_party == A), vec![]);
            if good_simple_party(&sp, &reg).ok {
                let extra = Split { cond_party: B, ..extra };
                reg.sign(B, SignableMessage::Revocation { version: extra.version, cond_party: B });
                let mut more = sp.clone();
                more.channel_info.received_revocations.push(extra);
                prop_assert!(good_simple_party(&more, &reg).ok);
            }
        }
    }
}
