//! A generic UTXO model for comparing the evaluator's subtraction rule against
//! the exact value of the ownership game on small instances.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::EvalValue;
use crate::params::Amount;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KeyId(pub String);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutputId(pub String);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub id: OutputId,
    pub key: KeyId,
    pub amount: Amount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PlainTx {
    pub id: String,
    pub inputs: Vec<OutputId>,
    pub outputs: Vec<Output>,
    /// Keys that have already signed this transaction.
    pub signed_by: BTreeSet<KeyId>,
}

/// Unspent outputs at the start of the game.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UtxoState {
    pub outputs: Vec<Output>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PlaygroundInstance {
    #[serde(default)]
    pub name: String,
    pub utxos: UtxoState,
    pub txs: Vec<PlainTx>,
    pub key: KeyId,
    pub horizon: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlaygroundError {
    #[error("output id {0} defined twice")]
    DuplicateOutput(String),
    #[error("transaction {tx} spends unknown output {input}")]
    UnknownInput { tx: String, input: String },
    #[error("transaction {0} does not conserve value")]
    NotConserving(String),
    #[error("transaction {0} has no inputs")]
    NoInputs(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("unknown builtin figure {0}")]
    UnknownFigure(String),
    #[error("malformed instance file: {0}")]
    Parse(String),
}

pub const MAX_OUTPUTS: usize = 5;
pub const MAX_TXS: usize = 5;
pub const MAX_HORIZON: u32 = 6;

pub const BUILTIN_FIGURES: [&str; 3] =
    ["fig-mutually-exclusive", "fig-reachable", "fig-unreachable"];

pub fn builtin_figure(name: &str) -> Result<PlaygroundInstance, PlaygroundError> {
    let text = match name {
        "fig-mutually-exclusive" => {
            include_str!("../../data/playground/fig-mutually-exclusive.json")
        }
        "fig-reachable" => include_str!("../../data/playground/fig-reachable.json"),
        "fig-unreachable" => include_str!("../../data/playground/fig-unreachable.json"),
        other => return Err(PlaygroundError::UnknownFigure(other.to_string())),
    };
    PlaygroundInstance::from_json(text)
}

/// Output table of an instance: every output that exists or may exist.
struct Graph<'a> {
    owner: HashMap<&'a OutputId, (&'a KeyId, Amount)>,
}

impl<'a> Graph<'a> {
    fn build(u: &'a UtxoState, txs: &'a [PlainTx]) -> Result<Self, PlaygroundError> {
        let mut owner = HashMap::new();
        let all = u
            .outputs
            .iter()
            .chain(txs.iter().flat_map(|t| t.outputs.iter()));
        for o in all {
            if owner.insert(&o.id, (&o.key, o.amount)).is_some() {
                return Err(PlaygroundError::DuplicateOutput(o.id.0.clone()));
            }
        }
        for tx in txs {
            if tx.inputs.is_empty() {
                return Err(PlaygroundError::NoInputs(tx.id.clone()));
            }
            let mut total_in: u128 = 0;
            for i in &tx.inputs {
                let (_, amt) = owner.get(i).ok_or_else(|| PlaygroundError::UnknownInput {
                    tx: tx.id.clone(),
                    input: i.0.clone(),
                })?;
                total_in += *amt as u128;
            }
            let total_out: u128 = tx.outputs.iter().map(|o| o.amount as u128).sum();
            if total_in != total_out {
                return Err(PlaygroundError::NotConserving(tx.id.clone()));
            }
        }
        Ok(Graph { owner })
    }

    fn key_of(&self, o: &OutputId) -> &'a KeyId {
        self.owner[o].0
    }

    /// Every input owner has signed.
    fn fully_signed(&self, tx: &PlainTx) -> bool {
        tx.inputs
            .iter()
            .all(|i| tx.signed_by.contains(self.key_of(i)))
    }

    /// Only `key`'s signature is missing, if anything.
    fn completable_by(&self, tx: &PlainTx, key: &KeyId) -> bool {
        tx.inputs.iter().all(|i| {
            let k = self.key_of(i);
            k == key || tx.signed_by.contains(k)
        })
    }
}

impl PlaygroundInstance {
    pub fn from_json(text: &str) -> Result<Self, PlaygroundError> {
        serde_json::from_str(text).map_err(|e| PlaygroundError::Parse(e.to_string()))
    }

    pub fn evaluate(&self) -> Result<EvalValue, PlaygroundError> {
        playground_evaluate(&self.utxos, &self.txs, &self.key)
    }

    pub fn extractable(&self) -> Result<Amount, PlaygroundError> {
        extractable_value(&self.utxos, &self.txs, &self.key, self.horizon)
    }
}

/// Coins on `key`'s unspent outputs minus everything signed transactions
/// spending `key`'s outputs would pay to other keys.
pub fn playground_evaluate(
    u: &UtxoState,
    txs: &[PlainTx],
    key: &KeyId,
) -> Result<EvalValue, PlaygroundError> {
    let graph = Graph::build(u, txs)?;
    let on_chain: EvalValue = u
        .outputs
        .iter()
        .filter(|o| &o.key == key)
        .map(|o| o.amount as EvalValue)
        .sum();
    let payout: EvalValue = txs
        .iter()
        .filter(|tx| graph.fully_signed(tx))
        .filter(|tx| tx.inputs.iter().any(|i| graph.key_of(i) == key))
        .flat_map(|tx| tx.outputs.iter())
        .filter(|o| &o.key != key)
        .map(|o| o.amount as EvalValue)
        .sum();
    Ok(on_chain - payout)
}

/// Exact min-max value of the ownership game.
///
/// Each round the Obstructor may submit one fully signed transaction, then the
/// Extractor may submit one it can complete with `key`'s signature. The game
/// stops after a round in which both pass, or after `horizon` rounds. The
/// payoff is the total on `key`'s unspent outputs.
pub fn extractable_value(
    u: &UtxoState,
    txs: &[PlainTx],
    key: &KeyId,
    horizon: u32,
) -> Result<Amount, PlaygroundError> {
    if u.outputs.len() > MAX_OUTPUTS {
        return Err(PlaygroundError::TooLarge(format!(
            "{} outputs",
            u.outputs.len()
        )));
    }
    if txs.len() > MAX_TXS {
        return Err(PlaygroundError::TooLarge(format!(
            "{} transactions",
            txs.len()
        )));
    }
    if horizon > MAX_HORIZON {
        return Err(PlaygroundError::TooLarge(format!("horizon {horizon}")));
    }
    let graph = Graph::build(u, txs)?;
    let total = u.outputs.len() + txs.iter().map(|t| t.outputs.len()).sum::<usize>();
    if total > 64 {
        return Err(PlaygroundError::TooLarge(format!(
            "{total} outputs in total"
        )));
    }
    let index: BTreeMap<&OutputId, usize> = u
        .outputs
        .iter()
        .chain(txs.iter().flat_map(|t| t.outputs.iter()))
        .enumerate()
        .map(|(n, o)| (&o.id, n))
        .collect();
    let amounts: Vec<(bool, Amount)> = u
        .outputs
        .iter()
        .chain(txs.iter().flat_map(|t| t.outputs.iter()))
        .map(|o| (&o.key == key, o.amount))
        .collect();
    let compiled: Vec<CompiledTx> = txs
        .iter()
        .map(|tx| CompiledTx {
            inputs: tx.inputs.iter().map(|i| index[i]).collect(),
            outputs: tx.outputs.iter().map(|o| index[&o.id]).collect(),
            obstructor: graph.fully_signed(tx),
            extractor: graph.completable_by(tx, key),
        })
        .collect();
    let search = Search {
        txs: compiled,
        amounts,
    };
    let start: u64 = (0..u.outputs.len()).fold(0, |m, n| m | 1 << n);
    let mut memo = HashMap::new();
    Ok(search.obstructor_turn(start, horizon, &mut memo))
}

struct CompiledTx {
    inputs: Vec<usize>,
    outputs: Vec<usize>,
    obstructor: bool,
    extractor: bool,
}

struct Search {
    txs: Vec<CompiledTx>,
    amounts: Vec<(bool, Amount)>,
}

impl Search {
    fn payoff(&self, unspent: u64) -> Amount {
        self.amounts
            .iter()
            .enumerate()
            .filter(|(n, (ours, _))| *ours && unspent & (1 << n) != 0)
            .map(|(_, (_, a))| *a)
            .sum()
    }

    /// Valid in `unspent`: all inputs present. A spent input also rules out
    /// replays, since outputs are never recreated.
    fn apply(&self, unspent: u64, t: &CompiledTx) -> Option<u64> {
        if t.inputs.iter().all(|&i| unspent & (1 << i) != 0) {
            let without = t.inputs.iter().fold(unspent, |m, &i| m & !(1 << i));
            Some(t.outputs.iter().fold(without, |m, &o| m | 1 << o))
        } else {
            None
        }
    }

    fn obstructor_turn(
        &self,
        unspent: u64,
        rounds: u32,
        memo: &mut HashMap<(u64, u32), Amount>,
    ) -> Amount {
        if rounds == 0 {
            return self.payoff(unspent);
        }
        if let Some(v) = memo.get(&(unspent, rounds)) {
            return *v;
        }
        let mut best = self.extractor_turn(unspent, rounds, false, memo);
        for t in self.txs.iter().filter(|t| t.obstructor) {
            if let Some(next) = self.apply(unspent, t) {
                best = best.min(self.extractor_turn(next, rounds, true, memo));
            }
        }
        memo.insert((unspent, rounds), best);
        best
    }

    fn extractor_turn(
        &self,
        unspent: u64,
        rounds: u32,
        obstructor_moved: bool,
        memo: &mut HashMap<(u64, u32), Amount>,
    ) -> Amount {
        let mut best = if obstructor_moved {
            self.obstructor_turn(unspent, rounds - 1, memo)
        } else {
            self.payoff(unspent)
        };
        for t in self.txs.iter().filter(|t| t.extractor) {
            if let Some(next) = self.apply(unspent, t) {
                best = best.max(self.obstructor_turn(next, rounds - 1, memo));
            }
        }
        best
    }
}
