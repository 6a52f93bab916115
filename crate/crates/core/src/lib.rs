//! Executable model of a two-party payment channel over a simplified
//! Bitcoin-like ledger, run as a deterministic adversarial game.
//!
//! The crate is organised bottom-up:
//!
//! * [`params`] – scalar types, party identities and the timing parameters.
//! * [`sigfun`] – the ideal signature functionality (a global registry).
//! * [`gamma`] – the ledger: balances, one channel and its lifecycle.
//! * [`party`] – the honest channel party state machine.
//! * [`interface`] – the implementation-agnostic party view and its predicates.
//! * [`evaluator`] – pessimistic valuation of the honest party's funds, plus a
//!   generic UTXO playground with an exact min-max oracle.
//! * [`game`] – the adversarial game: moves, applicability, invariant hooks.
//! * [`adversaries`] – scripted scenarios, the attack library, the fuzzer and
//!   trace minimisation.

pub mod adversaries;
pub mod evaluator;
pub mod game;
pub mod gamma;
pub mod interface;
pub mod params;
pub mod party;
pub mod sigfun;

pub use adversaries::{
    builtin_scenario, fuzz, minimize_trace, run_scenario, FuzzConfig, FuzzReport, GameTrace,
    MoveKind, Scenario, ScenarioError, BUILTIN_SCENARIOS,
};
pub use evaluator::{evaluate, EvalValue, TimingContext};
pub use game::{GameConfig, GameError, GameState, Move, PartyMutation, StepReport};
pub use gamma::{ChannelState, GammaEvent, GammaMsg, GammaState, Split, TransferDest};
pub use interface::{CheckResult, SimpleParty};
pub use params::{Amount, Params, ParamsError, PartyId, PartyMap, Time, ValidatedParams};
pub use party::{Effects, EnvOrder, PartyInput, PartyMsg, PartyState};
pub use sigfun::{SigRegistry, SignableMessage};
