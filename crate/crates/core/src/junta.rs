//! `Forming_junta`: agents `(l, a)` climb levels until a junta of
//! `O(√(n log n))` agents remains at the top level.
//!
//! Rules, for the agent being updated:
//! - `(0,1)` responder meeting a `(0,1)` initiator becomes `(0,0)` while the
//!   initiator becomes `(1,1)`;
//! - `(0,1)` in any other interaction, in either role, becomes `(0,0)`;
//! - `(l,1)` with `l > 0` changes only as responder: `(l+1,1)` if the
//!   initiator's level is at least `l`, `(l,0)` otherwise;
//! - agents with `a = 0` never change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Interaction, Protocol, RunReport};
use crate::error::JuntaError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct JuntaState {
    pub level: u8,
    pub active: bool,
}

impl JuntaState {
    pub const INITIAL: JuntaState = JuntaState { level: 0, active: true };
    pub const DEAD: JuntaState = JuntaState { level: 0, active: false };

    pub const fn new(level: u8, active: bool) -> Self {
        JuntaState { level, active }
    }
}

/// Uncapped transition.
pub fn junta_step(responder: JuntaState, initiator: JuntaState) -> (JuntaState, JuntaState) {
    junta_step_capped(responder, initiator, None)
}

/// Transition with an optional level cap. A responder that would climb past
/// the cap stays at the cap and stops (`(cap, 0)`), acting as a top-level agent.
pub fn junta_step_capped(
    responder: JuntaState,
    initiator: JuntaState,
    cap: Option<u8>,
) -> (JuntaState, JuntaState) {
    let mut r = responder;
    let mut i = initiator;
    if responder == JuntaState::INITIAL && initiator == JuntaState::INITIAL {
        return (JuntaState::DEAD, JuntaState::new(1, true));
    }
    if responder.active {
        r = if responder.level == 0 {
            JuntaState::DEAD
        } else if responder.level <= initiator.level {
            climb(responder.level, cap)
        } else {
            JuntaState::new(responder.level, false)
        };
    }
    if initiator == JuntaState::INITIAL {
        i = JuntaState::DEAD;
    }
    (r, i)
}

#[inline]
fn climb(level: u8, cap: Option<u8>) -> JuntaState {
    let cap = cap.unwrap_or(u8::MAX);
    if level >= cap {
        JuntaState::new(cap, false)
    } else {
        JuntaState::new(level + 1, true)
    }
}

/// Reset a state to `(0,0)`. Spoiling an agent at the population's current
/// maximum level is a composition bug.
pub fn spoil(state: JuntaState, global_max: u8) -> Result<JuntaState, JuntaError> {
    if state == JuntaState::DEAD {
        return Ok(state);
    }
    if state.level >= global_max {
        return Err(JuntaError::SpoilAtMaxLevel(global_max));
    }
    Ok(JuntaState::DEAD)
}

/// `(max level, agents at that level)` of a stabilized population.
pub fn junta_members(agents: &[JuntaState]) -> Result<(u8, usize), JuntaError> {
    let active = agents.iter().filter(|a| a.active).count();
    if active > 0 {
        return Err(JuntaError::NotStabilized(active));
    }
    let max = agents.iter().map(|a| a.level).max().unwrap_or(0);
    Ok((max, agents.iter().filter(|a| a.level == max).count()))
}

/// Adversarial spoiling: after each interaction, each participant that is
/// still active and strictly below the highest level reached so far is reset
/// to `(0,0)` with this probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Spoiler {
    pub probability: f64,
    pub seed: u64,
}

/// Standalone Forming_junta run.
pub struct JuntaProtocol {
    agents: Vec<JuntaState>,
    active: usize,
    max_reached: u8,
    cap: Option<u8>,
    spoiler: Option<(f64, ChaCha8Rng)>,
}

impl JuntaProtocol {
    pub fn new(n: usize) -> Self {
        JuntaProtocol {
            agents: vec![JuntaState::INITIAL; n],
            active: n,
            max_reached: 0,
            cap: None,
            spoiler: None,
        }
    }

    pub fn with_cap(mut self, cap: u8) -> Self {
        self.cap = Some(cap);
        self
    }

    pub fn with_spoiler(mut self, spoiler: Spoiler) -> Self {
        self.spoiler = Some((spoiler.probability, ChaCha8Rng::seed_from_u64(spoiler.seed)));
        self
    }

    pub fn max_reached(&self) -> u8 {
        self.max_reached
    }

    fn set(&mut self, idx: usize, s: JuntaState) {
        let old = self.agents[idx];
        if old.active && !s.active {
            self.active -= 1;
        }
        debug_assert!(old.active || !s.active, "a never returns to 1");
        self.max_reached = self.max_reached.max(s.level);
        self.agents[idx] = s;
    }
}

impl Protocol for JuntaProtocol {
    type Agent = JuntaState;

    fn agents(&self) -> &[JuntaState] {
        &self.agents
    }

    fn interact(&mut self, it: Interaction) {
        let (r, i) = junta_step_capped(self.agents[it.responder], self.agents[it.initiator], self.cap);
        self.set(it.responder, r);
        self.set(it.initiator, i);
        if let Some((p, rng)) = self.spoiler.as_mut() {
            let p = *p;
            let mut spoiled = [false; 2];
            for (slot, idx) in [it.responder, it.initiator].into_iter().enumerate() {
                let a = self.agents[idx];
                // Draw unconditionally so the spoil stream does not depend on state.
                let hit = rng.gen_bool(p);
                if hit && a.active && a.level < self.max_reached {
                    spoiled[slot] = true;
                }
            }
            for (slot, idx) in [it.responder, it.initiator].into_iter().enumerate() {
                if spoiled[slot] {
                    let s = spoil(self.agents[idx], self.max_reached).expect("below max level");
                    self.set(idx, s);
                }
            }
        }
    }

    fn is_stabilized(&self) -> bool {
        self.active == 0
    }

    /// Agents currently at the highest level.
    fn leader_count(&self) -> usize {
        self.agents.iter().filter(|a| a.level == self.max_reached).count()
    }

    fn state_key(&self, a: &JuntaState) -> u64 {
        a.level as u64 * 2 + a.active as u64
    }

    fn annotate(&self, report: &mut RunReport) {
        if let Ok((max, count)) = junta_members(&self.agents) {
            report.max_level = Some(max as u32);
            report.junta_size = Some(count);
            report.leader_count_final = count;
        }
    }

    fn check_invariants(&self, step: u64, violations: &mut Vec<String>) {
        let active = self.agents.iter().filter(|a| a.active).count();
        if active != self.active {
            violations.push(format!("step {step}: active counter {} != scan {active}", self.active));
        }
    }
}
