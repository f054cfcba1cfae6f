//! Leader election on top of a spoiled Forming_junta and two nested phase
//! clocks.
//!
//! Each agent carries `(l, a, b, x, y, z0, z1, z2)`: junta level and activity,
//! leadership, ordinary and external clock phases, and the coin-round
//! registers. While `a = 1` the agent runs Forming_junta, seeing followers as
//! `(0,0)`. Once `a = 0` it runs both clocks on its level, adopts any higher
//! level it meets as a follower with reset clocks, and every ordinary pass
//! through zero alternates it between a *draw* revolution (leaders toss a coin
//! from their scheduler role) and a *spread* revolution (drawn 1s spread by
//! epidemic and leaders that drew 0 step down).
//!
//! The Las Vegas variant caps the external clock at `m-1`, caps junta levels,
//! raises an epidemic alarm on distant ordinary phases, and runs the slow
//! initiator-wins elimination alongside so that a run can only end with one
//! leader.

use crate::engine::{Interaction, Protocol, RunReport, SimConfig, Variant};
use crate::junta::{junta_step_capped, JuntaState};
use crate::phase_clock::{
    clock_update, cyclic_distance, passed_zero, ClockFlags, ClockState, MaxMode, Phase, Role,
};

/// `z0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Draw,
    Spread,
}

/// `z1`: the coin drawn this round, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coin {
    Unset,
    Zero,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AgentState {
    pub level: u8,
    pub active: bool,
    pub leadership: Role,
    pub ordinary: Phase,
    pub external: Phase,
    pub z0: Stage,
    pub z1: Coin,
    pub z2: bool,
    pub flags: ClockFlags,
    pub slow_candidate: bool,
    pub external_terminal: bool,
}

impl AgentState {
    pub const INITIAL: AgentState = AgentState {
        level: 0,
        active: true,
        leadership: Role::Leader,
        ordinary: 0,
        external: 0,
        z0: Stage::Draw,
        z1: Coin::Unset,
        z2: false,
        flags: ClockFlags { meaningful_pending: false, alarm: false },
        slow_candidate: true,
        external_terminal: false,
    };

    pub fn is_leader(&self) -> bool {
        self.leadership == Role::Leader
    }

    /// The agent's own Forming_junta pair.
    pub fn junta(&self) -> JuntaState {
        JuntaState::new(self.level, self.active)
    }

    /// How the agent looks to an agent still forming the junta: followers
    /// count as spoiled `(0,0)`.
    pub fn junta_view(&self) -> JuntaState {
        match self.leadership {
            Role::Follower => JuntaState::DEAD,
            Role::Leader => self.junta(),
        }
    }

    /// Whether the agent may still end up as the elected leader.
    pub fn could_lead(&self) -> bool {
        self.is_leader() || (self.slow_candidate && !self.external_terminal)
    }
}

impl Default for AgentState {
    fn default() -> Self {
        AgentState::INITIAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariantParams {
    pub m: u32,
    /// Combine rule for the external clock; the ordinary clock is always circular.
    pub mode_max: MaxMode,
    pub level_cap: Option<u8>,
    /// Alarm on ordinary phases at cyclic distance in `(m/5, 4m/5)`.
    pub distant_alarm: bool,
    pub slow_enabled: bool,
}

impl VariantParams {
    pub fn fast(m: u32) -> Self {
        VariantParams {
            m,
            mode_max: MaxMode::Circular,
            level_cap: None,
            distant_alarm: false,
            slow_enabled: false,
        }
    }

    pub fn las_vegas(m: u32, level_cap: u8) -> Self {
        VariantParams {
            m,
            mode_max: MaxMode::Capped,
            level_cap: Some(level_cap),
            distant_alarm: true,
            slow_enabled: true,
        }
    }

    pub fn is_las_vegas(&self) -> bool {
        self.mode_max == MaxMode::Capped
    }

    pub fn for_config(config: &SimConfig) -> Self {
        match config.variant {
            Variant::LasVegas => Self::las_vegas(config.m, config.effective_level_cap() as u8),
            _ => Self::fast(config.m),
        }
    }
}

/// Coin drawn by a leader meeting a follower: 0 as responder, 1 as initiator.
#[inline]
pub fn coin_from_roles(leader_is_responder: bool) -> Coin {
    if leader_is_responder {
        Coin::Zero
    } else {
        Coin::One
    }
}

/// With `peer = x +_m a`, true iff `m/5 < a < 4m/5`.
#[inline]
pub fn distant_phases(x: Phase, peer: Phase, m: u32) -> bool {
    let a = cyclic_distance(x, peer, m);
    5 * a > m && 5 * a < 4 * m
}

/// Slow two-state elimination plus the terminal-leader rules.
///
/// Two slow candidates: the responder drops out. Two terminal fast leaders on
/// the same level: the responder steps down. A terminal agent that is not a
/// fast leader stops being a slow candidate.
pub fn slow_step(responder: AgentState, initiator: AgentState) -> (AgentState, AgentState) {
    let mut r = responder;
    let mut i = initiator;
    if responder.slow_candidate && initiator.slow_candidate {
        r.slow_candidate = false;
    }
    if responder.external_terminal
        && initiator.external_terminal
        && responder.is_leader()
        && initiator.is_leader()
        && responder.level == initiator.level
    {
        r.leadership = Role::Follower;
    }
    for s in [&mut r, &mut i] {
        if s.external_terminal && !s.is_leader() {
            s.slow_candidate = false;
        }
    }
    (r, i)
}

/// One interaction of the composed protocol. Both participants run the
/// per-agent script against the other's pre-interaction state; the results
/// are applied together.
pub fn le_step(
    responder: AgentState,
    initiator: AgentState,
    params: &VariantParams,
) -> (AgentState, AgentState) {
    let r = participant(responder, initiator, true, params);
    let i = participant(initiator, responder, false, params);
    if params.slow_enabled {
        slow_step(r, i)
    } else {
        (r, i)
    }
}

fn participant(me: AgentState, peer: AgentState, responder: bool, p: &VariantParams) -> AgentState {
    let m = p.m;
    let mut s = me;
    if p.distant_alarm && peer.flags.alarm {
        s.flags.alarm = true;
    }

    if me.active {
        let j = if responder {
            junta_step_capped(me.junta(), peer.junta_view(), p.level_cap).0
        } else {
            junta_step_capped(peer.junta_view(), me.junta(), p.level_cap).1
        };
        s.level = j.level;
        s.active = j.active;
        return s;
    }
    if peer.active || me.level > peer.level {
        return s;
    }
    if me.level < peer.level {
        s.level = peer.level;
        s.leadership = Role::Follower;
        s.ordinary = 0;
        s.external = 0;
        s.z0 = Stage::Draw;
        s.z1 = Coin::Unset;
        s.z2 = false;
        s.flags.meaningful_pending = false;
        s.external_terminal = false;
        return s;
    }

    // Same level, both clocks running.
    // Only clocks that have completed a revolution on this level are compared;
    // fresh adopters and transient lower-level clocks sit at arbitrary phases.
    if p.distant_alarm
        && me.external > 0
        && peer.external > 0
        && distant_phases(me.ordinary, peer.ordinary, m)
    {
        s.flags.alarm = true;
    }
    let mut passed = false;
    if responder {
        if me.flags.meaningful_pending || me.flags.alarm {
            s.flags.meaningful_pending = false;
            if !me.external_terminal {
                let y = clock_update(
                    ClockState { phase: me.external, role: me.leadership },
                    peer.external,
                    m,
                    p.mode_max,
                );
                s.external = y;
                if p.is_las_vegas() && y as u32 == m - 1 {
                    s.external_terminal = true;
                }
            }
        }
        let x = clock_update(
            ClockState { phase: me.ordinary, role: me.leadership },
            peer.ordinary,
            m,
            MaxMode::Circular,
        );
        s.ordinary = x;
        passed = passed_zero(me.ordinary, x);
        if passed {
            s.flags.meaningful_pending = true;
            match s.z0 {
                Stage::Draw => {
                    s.z0 = Stage::Spread;
                    s.z2 = false;
                }
                Stage::Spread => {
                    s.z0 = Stage::Draw;
                    s.z1 = Coin::Unset;
                }
            }
        }
    }

    // The coin is tossed on a later interaction than the pass itself, which
    // always has this agent as responder.
    if !passed && s.z0 == Stage::Draw && s.z1 == Coin::Unset && s.is_leader() && !peer.is_leader() {
        s.z1 = coin_from_roles(responder);
    }
    // Only a peer that is itself spreading contributes; a peer still in its
    // draw revolution holds last round's z2.
    if s.z0 == Stage::Spread && responder && peer.z0 == Stage::Spread {
        s.z2 = s.z2 || peer.z1 == Coin::One || peer.z2;
    }
    if s.z0 == Stage::Spread && s.is_leader() && s.z1 == Coin::Zero && s.z2 && !s.external_terminal {
        s.leadership = Role::Follower;
    }
    s
}

/// Agents counted as leaders under the variant's filters.
pub fn count_leaders(agents: &[AgentState], params: &VariantParams) -> usize {
    if params.is_las_vegas() {
        agents.iter().filter(|a| a.could_lead()).count()
    } else {
        agents.iter().filter(|a| a.is_leader()).count()
    }
}

/// Injective key over every field of [`AgentState`].
pub fn state_key(a: &AgentState, m: u32) -> u64 {
    let m = m as u64;
    let mut k = a.level as u64;
    k = k * 2 + a.active as u64;
    k = k * 2 + a.is_leader() as u64;
    k = k * m + a.ordinary as u64;
    k = k * m + a.external as u64;
    k = k * 2 + (a.z0 == Stage::Spread) as u64;
    k = k * 3
        + match a.z1 {
            Coin::Unset => 0,
            Coin::Zero => 1,
            Coin::One => 2,
        };
    k = k * 2 + a.z2 as u64;
    k = k * 2 + a.flags.meaningful_pending as u64;
    k = k * 2 + a.flags.alarm as u64;
    k = k * 2 + a.slow_candidate as u64;
    k * 2 + a.external_terminal as u64
}

/// Fast or Las Vegas leader election over a population.
pub struct ElectionProtocol {
    params: VariantParams,
    agents: Vec<AgentState>,
    active: usize,
    leaders: usize,
    could_lead: usize,
    terminal: usize,
    /// Fast variant: the external clock has reached `m-1` (or wrapped).
    concluded: Vec<bool>,
    concluded_count: usize,
    /// Agents that finished Forming_junta as leaders, per level.
    finished_at_level: Vec<usize>,
    alarms: usize,
}

impl ElectionProtocol {
    pub fn new(n: usize, params: VariantParams) -> Self {
        ElectionProtocol {
            params,
            agents: vec![AgentState::INITIAL; n],
            active: n,
            leaders: n,
            could_lead: n,
            terminal: 0,
            concluded: vec![false; n],
            concluded_count: 0,
            finished_at_level: Vec::new(),
            alarms: 0,
        }
    }

    pub fn from_config(config: &SimConfig) -> Self {
        Self::new(config.n, VariantParams::for_config(config))
    }

    pub fn params(&self) -> &VariantParams {
        &self.params
    }

    /// Agents with `b = leader`.
    pub fn fast_leaders(&self) -> usize {
        self.leaders
    }

    pub fn active(&self) -> usize {
        self.active
    }

    pub fn alarms(&self) -> usize {
        self.alarms
    }

    pub fn concluded(&self) -> usize {
        self.concluded_count
    }

    pub fn max_level(&self) -> u8 {
        self.agents.iter().map(|a| a.level).max().unwrap_or(0)
    }

    fn replace(&mut self, idx: usize, old: AgentState, new: AgentState) {
        if old == new {
            return;
        }
        if old.active && !new.active {
            self.active -= 1;
            if new.is_leader() {
                let l = new.level as usize;
                if self.finished_at_level.len() <= l {
                    self.finished_at_level.resize(l + 1, 0);
                }
                self.finished_at_level[l] += 1;
            }
        }
        self.leaders = self.leaders + new.is_leader() as usize - old.is_leader() as usize;
        self.could_lead = self.could_lead + new.could_lead() as usize - old.could_lead() as usize;
        self.terminal =
            self.terminal + new.external_terminal as usize - old.external_terminal as usize;
        self.alarms = self.alarms + new.flags.alarm as usize - old.flags.alarm as usize;
        if !self.concluded[idx]
            && !old.active
            && old.level == new.level
            && (new.external as u32 == self.params.m - 1 || passed_zero(old.external, new.external))
        {
            self.concluded[idx] = true;
            self.concluded_count += 1;
        }
        self.agents[idx] = new;
    }
}

impl Protocol for ElectionProtocol {
    type Agent = AgentState;

    fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    #[inline]
    fn interact(&mut self, it: Interaction) {
        let r0 = self.agents[it.responder];
        let i0 = self.agents[it.initiator];
        let (r1, i1) = le_step(r0, i0, &self.params);
        self.replace(it.responder, r0, r1);
        self.replace(it.initiator, i0, i1);
    }

    fn is_stabilized(&self) -> bool {
        let n = self.agents.len();
        if self.params.is_las_vegas() {
            self.active == 0
                && self.could_lead == 1
                && (self.terminal == n || (self.leaders == 0 && self.terminal == 0))
        } else {
            self.concluded_count == n
        }
    }

    fn leader_count(&self) -> usize {
        if self.params.is_las_vegas() {
            self.could_lead
        } else {
            self.leaders
        }
    }

    fn state_key(&self, a: &AgentState) -> u64 {
        state_key(a, self.params.m)
    }

    fn annotate(&self, report: &mut RunReport) {
        let max = self.max_level();
        report.max_level = Some(max as u32);
        report.junta_size = Some(self.finished_at_level.get(max as usize).copied().unwrap_or(0));
    }

    fn check_invariants(&self, step: u64, violations: &mut Vec<String>) {
        let scan_leaders = count_leaders(&self.agents, &self.params);
        if scan_leaders != self.leader_count() {
            violations.push(format!(
                "step {step}: leader counter {} != scan {scan_leaders}",
                self.leader_count()
            ));
        }
        if self.params.is_las_vegas() && self.could_lead == 0 {
            violations.push(format!("step {step}: no agent can still become leader"));
        }
        for a in &self.agents {
            if a.external_terminal && a.external as u32 != self.params.m - 1 {
                violations.push(format!("step {step}: terminal agent off phase m-1"));
                break;
            }
        }
    }
}

/// Pure slow protocol: every agent starts as a candidate; when two candidates
/// meet the initiator eliminates the responder.
pub struct SlowProtocol {
    agents: Vec<AgentState>,
    candidates: usize,
}

impl SlowProtocol {
    pub fn new(n: usize) -> Self {
        SlowProtocol {
            agents: vec![AgentState::INITIAL; n],
            candidates: n,
        }
    }
}

impl Protocol for SlowProtocol {
    type Agent = AgentState;

    fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    #[inline]
    fn interact(&mut self, it: Interaction) {
        let (r, i) = slow_step(self.agents[it.responder], self.agents[it.initiator]);
        self.candidates -= (self.agents[it.responder].slow_candidate && !r.slow_candidate) as usize;
        self.agents[it.responder] = r;
        self.agents[it.initiator] = i;
    }

    fn is_stabilized(&self) -> bool {
        self.candidates == 1
    }

    fn leader_count(&self) -> usize {
        self.candidates
    }

    fn state_key(&self, a: &AgentState) -> u64 {
        state_key(a, 2)
    }
}
