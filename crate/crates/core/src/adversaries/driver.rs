//! Plays the corrupted slot with a real party state machine and records every
//! resulting move. Scenario builders and the fuzzer both sit on top of this.

use std::collections::VecDeque;

use crate::game::{GameError, GameState, Move, StepReport};
use crate::gamma::GammaMsg;
use crate::party::{EnvOrder, PartyInput, PartyMsg, PartyState};

/// Upper bound on message ping-pong within one `pump`.
const PUMP_LIMIT: usize = 64;

pub(crate) struct Driver {
    pub game: GameState,
    /// The counterparty's own state machine, run by the adversary.
    pub mirror: PartyState,
    /// Messages from the honest party not yet fed to the mirror.
    pub inbox: VecDeque<PartyMsg>,
    pub moves: Vec<Move>,
    pub reports: Vec<StepReport>,
}

impl Driver {
    pub fn new(game: GameState) -> Self {
        let mirror = PartyState::new(game.corrupted(), &game.params);
        Driver {
            game,
            mirror,
            inbox: VecDeque::new(),
            moves: Vec::new(),
            reports: Vec::new(),
        }
    }

    pub fn play(&mut self, m: Move) -> Result<&StepReport, GameError> {
        let (next, report) = self.game.apply_move(&m)?;
        self.game = next;
        if let Some(fx) = &report.party_effects {
            self.inbox.extend(fx.msgs_to_counterparty.iter().cloned());
        }
        self.moves.push(m);
        self.reports.push(report);
        Ok(self.reports.last().expect("just pushed"))
    }

    /// Steps the mirror. Its signatures are published at once; ledger
    /// messages and messages for the honest party are returned.
    pub fn mirror_step(
        &mut self,
        input: PartyInput,
    ) -> Result<(Vec<GammaMsg>, Vec<PartyMsg>), GameError> {
        let g = &self.game;
        let (next, fx) = self.mirror.step(&input, &g.gamma, &g.reg, g.now, &g.params);
        self.mirror = next;
        if !fx.signatures_added.is_empty() {
            let msgs = fx.signatures_added.into_iter().map(|(_, m)| m).collect();
            self.play(Move::SignMsg { msgs })?;
        }
        Ok((fx.msgs_to_gamma, fx.msgs_to_counterparty))
    }

    /// Relays faithfully: every mirror output is acted on immediately.
    fn relay(&mut self, input: PartyInput) -> Result<(), GameError> {
        let (to_gamma, to_party) = self.mirror_step(input)?;
        for msg in to_gamma {
            self.play(Move::SendMsgToGamma { msg })?;
        }
        for msg in to_party {
            self.play(Move::SendMsgToParty { msg })?;
        }
        Ok(())
    }

    /// Feeds honest messages to the mirror until both sides fall silent.
    pub fn pump(&mut self) -> Result<(), GameError> {
        for _ in 0..PUMP_LIMIT {
            let Some(msg) = self.inbox.pop_front() else {
                return Ok(());
            };
            self.relay(PartyInput::Msg(msg))?;
        }
        Ok(())
    }

    pub fn env(&mut self, order: EnvOrder) -> Result<(), GameError> {
        self.play(Move::ControlEnvironment { order })?;
        self.pump()
    }

    pub fn mirror_env(&mut self, order: EnvOrder) -> Result<(), GameError> {
        self.relay(PartyInput::Env(order))?;
        self.pump()
    }

    pub fn deliver_all(&mut self) -> Result<(), GameError> {
        while !self.game.queue.is_empty() {
            self.play(Move::DeliverMsgToGamma { index: 0 })?;
        }
        Ok(())
    }

    /// Does whatever the rules force before time may advance.
    pub fn make_time_advanceable(&mut self) -> Result<(), GameError> {
        loop {
            let next = self.game.now + 1;
            let dn = self.game.params.delta_net;
            if let Some(i) = self.game.queue.iter().position(|q| next - q.sent_at > dn) {
                self.play(Move::DeliverMsgToGamma { index: i })?;
                continue;
            }
            if next - self.game.last_activation > self.game.params.delta_wake {
                self.play(Move::ControlEnvironment {
                    order: EnvOrder::JustCheckGamma,
                })?;
                continue;
            }
            return Ok(());
        }
    }

    /// Advances one round, delivering and waking as late as allowed.
    pub fn tick(&mut self) -> Result<(), GameError> {
        self.make_time_advanceable()?;
        self.play(Move::IncrementTime).map(|_| ())
    }

    /// Ticks until `t`, calling `hook` before every tick.
    pub fn idle_until(
        &mut self,
        t: u64,
        mut hook: impl FnMut(&mut Driver) -> Result<(), GameError>,
    ) -> Result<(), GameError> {
        while self.game.now < t {
            hook(self)?;
            self.tick()?;
        }
        hook(self)
    }
}
