//! Shared scalar types and the game's timing parameters.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coin count. Balances are never negative.
pub type Amount = u64;

/// Discrete round counter.
pub type Time = u64;

/// One of the two channel participants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PartyId {
    A,
    B,
}

impl PartyId {
    pub const ALL: [PartyId; 2] = [PartyId::A, PartyId::B];

    pub fn counterparty(self) -> PartyId {
        match self {
            PartyId::A => PartyId::B,
            PartyId::B => PartyId::A,
        }
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartyId::A => f.write_str("A"),
            PartyId::B => f.write_str("B"),
        }
    }
}

/// A total map from [`PartyId`] to `T`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartyMap<T> {
    #[serde(rename = "A")]
    pub a: T,
    #[serde(rename = "B")]
    pub b: T,
}

impl<T> PartyMap<T> {
    pub fn new(a: T, b: T) -> Self {
        Self { a, b }
    }
}

impl<T> Index<PartyId> for PartyMap<T> {
    type Output = T;

    fn index(&self, p: PartyId) -> &T {
        match p {
            PartyId::A => &self.a,
            PartyId::B => &self.b,
        }
    }
}

impl<T> IndexMut<PartyId> for PartyMap<T> {
    fn index_mut(&mut self, p: PartyId) -> &mut T {
        match p {
            PartyId::A => &mut self.a,
            PartyId::B => &mut self.b,
        }
    }
}

/// Timing bounds and initial ledger endowment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Params {
    /// Maximum number of rounds between two honest activations.
    pub delta_wake: Time,
    /// Maximum number of rounds a queued ledger message may stay undelivered.
    pub delta_net: Time,
    /// Dispute delay before the conditional output can be claimed.
    pub channel_timelock: Time,
    /// Budget between a close order and guaranteed settlement.
    pub channel_closing_time: Time,
    pub initial_coins: PartyMap<Amount>,
}

impl Default for Params {
    /// The smallest parameters meeting both timing inequalities with equality.
    fn default() -> Self {
        Params {
            delta_wake: 2,
            delta_net: 3,
            channel_timelock: 6,
            channel_closing_time: 20,
            initial_coins: PartyMap::new(20, 10),
        }
    }
}

/// Which parameter constraint failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constraint {
    /// `channelClosingTime >= 3*deltaNet + 2*deltaWake + channelTimelock + 1`
    Closing,
    /// `channelTimelock >= deltaWake + deltaNet + 1`
    Timelock,
    Positive(&'static str),
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Closing => f.write_str("closing"),
            Constraint::Timelock => f.write_str("timelock"),
            Constraint::Positive(field) => write!(f, "positive({field})"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParamsError {
    #[error("constraint violated: {constraint} ({detail})")]
    ConstraintViolated {
        constraint: Constraint,
        detail: String,
    },
}

impl ParamsError {
    pub fn constraint(&self) -> Constraint {
        match self {
            ParamsError::ConstraintViolated { constraint, .. } => *constraint,
        }
    }
}

/// One of the two timing inequalities, with both sides evaluated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inequality {
    pub constraint: Constraint,
    pub formula: &'static str,
    pub lhs: u128,
    pub rhs: u128,
}

impl Inequality {
    pub fn holds(&self) -> bool {
        self.lhs >= self.rhs
    }

    /// `lhs - rhs`; negative when violated.
    pub fn slack(&self) -> i128 {
        self.lhs as i128 - self.rhs as i128
    }
}

impl Params {
    /// Both inequalities, in the order they are checked.
    pub fn inequalities(&self) -> [Inequality; 2] {
        let (dw, dn, tl, ct) = (
            self.delta_wake as u128,
            self.delta_net as u128,
            self.channel_timelock as u128,
            self.channel_closing_time as u128,
        );
        [
            Inequality {
                constraint: Constraint::Closing,
                formula: "channelClosingTime >= 3*deltaNet + 2*deltaWake + channelTimelock + 1",
                lhs: ct,
                rhs: 3 * dn + 2 * dw + tl + 1,
            },
            Inequality {
                constraint: Constraint::Timelock,
                formula: "channelTimelock >= deltaWake + deltaNet + 1",
                lhs: tl,
                rhs: dw + dn + 1,
            },
        ]
    }

    pub fn validate(self) -> Result<ValidatedParams, ParamsError> {
        for (name, v) in [
            ("deltaWake", self.delta_wake),
            ("deltaNet", self.delta_net),
            ("channelTimelock", self.channel_timelock),
            ("channelClosingTime", self.channel_closing_time),
        ] {
            if v == 0 {
                return Err(ParamsError::ConstraintViolated {
                    constraint: Constraint::Positive(name),
                    detail: format!("{name} must be at least 1"),
                });
            }
        }
        for ineq in self.inequalities() {
            if !ineq.holds() {
                return Err(ParamsError::ConstraintViolated {
                    constraint: ineq.constraint,
                    detail: format!("{}: {} < {}", ineq.formula, ineq.lhs, ineq.rhs),
                });
            }
        }
        Ok(ValidatedParams(self))
    }
}

/// Parameters that passed [`Params::validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ValidatedParams(Params);

impl ValidatedParams {
    pub fn get(&self) -> &Params {
        &self.0
    }

    pub fn into_inner(self) -> Params {
        self.0
    }
}

impl std::ops::Deref for ValidatedParams {
    type Target = Params;

    fn deref(&self) -> &Params {
        &self.0
    }
}

impl<'de> Deserialize<'de> for ValidatedParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Params::deserialize(d)?
            .validate()
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(dw: Time, dn: Time, tl: Time, ct: Time) -> Params {
        Params {
            delta_wake: dw,
            delta_net: dn,
            channel_timelock: tl,
            channel_closing_time: ct,
            ..Params::default()
        }
    }

    #[test]
    fn minimal_params_accepted() {
        let v = p(2, 3, 6, 20).validate().unwrap();
        assert_eq!(v.get(), &p(2, 3, 6, 20));
        assert!(v.inequalities().iter().all(|i| i.slack() == 0));
    }

    #[test]
    fn closing_budget_one_short() {
        let err = p(2, 3, 6, 19).validate().unwrap_err();
        assert_eq!(err.constraint(), Constraint::Closing);
    }

    #[test]
    fn timelock_one_short() {
        let err = p(2, 3, 5, 20).validate().unwrap_err();
        assert_eq!(err.constraint(), Constraint::Timelock);
    }

    #[test]
    fn zero_field_rejected() {
        let err = p(0, 3, 6, 20).validate().unwrap_err();
        assert_eq!(err.constraint(), Constraint::Positive("deltaWake"));
    }

    #[test]
    fn counterparty_is_involution() {
        for p in PartyId::ALL {
            assert_ne!(p.counterparty(), p);
            assert_eq!(p.counterparty().counterparty(), p);
        }
    }

    #[test]
    fn accepted_params_have_strict_delivery_margin() {
        for dw in 1..5 {
            for dn in 1..5 {
                for tl in 1..12 {
                    for ct in 1..40 {
                        if let Ok(v) = p(dw, dn, tl, ct).validate() {
                            assert!(v.delta_wake + v.delta_net < v.channel_timelock);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn json_field_names() {
        let json = serde_json::to_string(&Params::default()).unwrap();
        assert_eq!(
            json,
            r#"{"deltaWake":2,"deltaNet":3,"channelTimelock":6,"channelClosingTime":20,"initialCoins":{"A":20,"B":10}}"#
        );
        let bad = r#"{"deltaWake":2,"deltaNet":3,"channelTimelock":6,"channelClosingTime":19,"initialCoins":{"A":20,"B":10}}"#;
        assert!(serde_json::from_str::<ValidatedParams>(bad).is_err());
    }
}
