//! Modular phase arithmetic on `Z_m` and the junta-driven clock rules.
//!
//! A follower responder adopts `max_m{x, y}`; a leader responder adopts
//! `max_m{x, y +_m 1}`. The initiator never changes. A clock *passes through
//! zero* when an update makes its phase numerically smaller.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Interaction, Protocol, RunReport, SimConfig};

pub type Phase = u8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Leader,
    Follower,
}

/// How an update combines the two phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaxMode {
    /// `max_m`, wrapping.
    Circular,
    /// Plain numeric max with the leader increment clamped at `m-1`.
    Capped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClockState {
    pub phase: Phase,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ClockFlags {
    /// The ordinary clock passed zero and the owner has not been a responder since.
    pub meaningful_pending: bool,
    /// Distant phases were seen; every responder interaction ticks the external clock.
    pub alarm: bool,
}

#[inline]
pub fn add_mod(x: Phase, d: u32, m: u32) -> Phase {
    debug_assert!((x as u32) < m);
    ((x as u32 + d % m) % m) as Phase
}

/// `max{x,y}` when `|x-y| ≤ m/2`, otherwise `min{x,y}`.
#[inline]
pub fn max_mod(x: Phase, y: Phase, m: u32) -> Phase {
    if 2 * (x.abs_diff(y) as u32) <= m {
        x.max(y)
    } else {
        x.min(y)
    }
}

/// Circular order: `x ≤_m y` iff `max_m{x,y} = y`.
#[inline]
pub fn leq_mod(x: Phase, y: Phase, m: u32) -> bool {
    max_mod(x, y, m) == y
}

/// Forward distance from `x` to `y` around the dial.
#[inline]
pub fn cyclic_distance(x: Phase, y: Phase, m: u32) -> u32 {
    (y as u32 + m - x as u32) % m
}

/// New responder phase after meeting an initiator at `initiator_phase`.
#[inline]
pub fn clock_update(responder: ClockState, initiator_phase: Phase, m: u32, mode: MaxMode) -> Phase {
    let target = match (responder.role, mode) {
        (Role::Follower, _) => initiator_phase,
        (Role::Leader, MaxMode::Circular) => add_mod(initiator_phase, 1, m),
        (Role::Leader, MaxMode::Capped) => (initiator_phase as u32 + 1).min(m - 1) as Phase,
    };
    match mode {
        MaxMode::Circular => max_mod(responder.phase, target, m),
        MaxMode::Capped => responder.phase.max(target),
    }
}

#[inline]
pub fn passed_zero(old_phase: Phase, new_phase: Phase) -> bool {
    new_phase < old_phase
}

/// Agent of the standalone clock protocol: both clock modes plus the flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClockAgent {
    pub ordinary: Phase,
    pub external: Phase,
    pub role: Role,
    pub flags: ClockFlags,
}

/// Faults injected into a clock run. Decisions come from a separate stream,
/// so the scheduler draws match an unperturbed run with the same seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub seed: u64,
    /// Fraction of current leaders demoted at `demote_at`.
    pub demote_fraction: f64,
    pub demote_at: u64,
    /// Probability that an interaction is voided for the clocks.
    pub void_probability: f64,
}

struct PerturbState {
    plan: Perturbation,
    rng: ChaCha8Rng,
}

/// A fixed junta of leaders driving ordinary and external clocks.
pub struct ClockProtocol {
    m: u32,
    agents: Vec<ClockAgent>,
    passes: Vec<u32>,
    target_passes: u32,
    done: usize,
    leaders: usize,
    steps: u64,
    perturb: Option<PerturbState>,
}

impl ClockProtocol {
    /// `leaders` agents start as leaders; everyone starts at phase 0.
    pub fn new(n: usize, m: u32, leaders: usize, target_passes: u32) -> Self {
        let leaders = leaders.clamp(1, n);
        let agents = (0..n)
            .map(|i| ClockAgent {
                ordinary: 0,
                external: 0,
                role: if i < leaders { Role::Leader } else { Role::Follower },
                flags: ClockFlags::default(),
            })
            .collect();
        ClockProtocol {
            m,
            agents,
            passes: vec![0; n],
            target_passes,
            done: if target_passes == 0 { n } else { 0 },
            leaders,
            steps: 0,
            perturb: None,
        }
    }

    /// Junta of `round(n^{1-ε})` leaders with `ε = 3/(3k+1)`.
    pub fn from_config(config: &SimConfig) -> Self {
        let leaders = junta_size_for(config.n, config.epsilon());
        Self::new(config.n, config.m, leaders, config.clock_passes)
    }

    pub fn with_perturbation(mut self, plan: Perturbation) -> Self {
        self.perturb = Some(PerturbState {
            rng: ChaCha8Rng::seed_from_u64(plan.seed),
            plan,
        });
        self
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn passes(&self) -> &[u32] {
        &self.passes
    }

    fn demote(&mut self) {
        let Some(p) = self.perturb.as_mut() else { return };
        let mut leaders: Vec<usize> = (0..self.agents.len())
            .filter(|&i| self.agents[i].role == Role::Leader)
            .collect();
        let count = (leaders.len() as f64 * p.plan.demote_fraction).floor() as usize;
        for j in 0..count {
            let pick = p.rng.gen_range(j..leaders.len());
            leaders.swap(j, pick);
            self.agents[leaders[j]].role = Role::Follower;
        }
        self.leaders -= count;
    }
}

/// `round(n^{1-ε})`, at least one.
pub fn junta_size_for(n: usize, epsilon: f64) -> usize {
    ((n as f64).powf(1.0 - epsilon).round() as usize).clamp(1, n)
}

impl Protocol for ClockProtocol {
    type Agent = ClockAgent;

    fn agents(&self) -> &[ClockAgent] {
        &self.agents
    }

    fn interact(&mut self, it: Interaction) {
        self.steps += 1;
        if let Some(p) = self.perturb.as_mut() {
            if self.steps == p.plan.demote_at {
                self.demote();
            }
        }
        if let Some(p) = self.perturb.as_mut() {
            if p.plan.void_probability > 0.0 && p.rng.gen_bool(p.plan.void_probability) {
                return;
            }
        }
        let m = self.m;
        let r = self.agents[it.responder];
        let i = self.agents[it.initiator];
        let mut next = r;
        if r.flags.meaningful_pending || r.flags.alarm {
            next.external = clock_update(
                ClockState { phase: r.external, role: r.role },
                i.external,
                m,
                MaxMode::Circular,
            );
            next.flags.meaningful_pending = false;
        }
        let x = clock_update(
            ClockState { phase: r.ordinary, role: r.role },
            i.ordinary,
            m,
            MaxMode::Circular,
        );
        if passed_zero(r.ordinary, x) {
            next.flags.meaningful_pending = true;
            let p = &mut self.passes[it.responder];
            *p += 1;
            if *p == self.target_passes {
                self.done += 1;
            }
        }
        next.ordinary = x;
        self.agents[it.responder] = next;
    }

    fn is_stabilized(&self) -> bool {
        self.done == self.agents.len()
    }

    fn leader_count(&self) -> usize {
        self.leaders
    }

    fn state_key(&self, a: &ClockAgent) -> u64 {
        let m = self.m as u64;
        (((a.ordinary as u64 * m + a.external as u64) * 2 + (a.role == Role::Leader) as u64) * 2
            + a.flags.meaningful_pending as u64)
            * 2
            + a.flags.alarm as u64
    }

    fn annotate(&self, report: &mut RunReport) {
        report.junta_size = Some(self.leaders);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Scheduler, Simulator, Variant};

    /// Definition-level oracle: the piecewise max written out over integers.
    fn max_oracle(x: i64, y: i64, m: i64) -> i64 {
        if 2 * (x - y).abs() <= m {
            x.max(y)
        } else {
            x.min(y)
        }
    }

    #[test]
    fn add_mod_examples() {
        assert_eq!(add_mod(7, 1, 8), 0);
        assert_eq!(add_mod(0, 0, 8), 0);
        assert_eq!(add_mod(3, 1, 8), 4);
        assert_eq!(add_mod(3, 17, 8), 4);
    }

    #[test]
    fn max_mod_examples() {
        assert_eq!(max_mod(5, 3, 8), 5);
        assert_eq!(max_mod(7, 1, 8), 1);
        assert_eq!(max_mod(4, 4, 8), 4);
        assert_eq!(max_mod(0, 4, 8), 4);
        assert_eq!(max_mod(4, 0, 8), 4);
    }

    #[test]
    fn max_mod_matches_definition_exhaustively() {
        for m in 2..=32u32 {
            for x in 0..m {
                for y in 0..m {
                    assert_eq!(
                        max_mod(x as Phase, y as Phase, m) as i64,
                        max_oracle(x as i64, y as i64, m as i64)
                    );
                }
            }
        }
    }

    #[test]
    fn max_mod_total_and_symmetric() {
        for m in 4..=16u32 {
            for x in 0..m as Phase {
                for y in 0..m as Phase {
                    let z = max_mod(x, y, m);
                    assert!(z == x || z == y);
                    assert_eq!(z, max_mod(y, x, m));
                    assert!(leq_mod(x, y, m) || leq_mod(y, x, m));
                }
            }
        }
    }

    #[test]
    fn leq_mod_examples() {
        assert!(leq_mod(3, 5, 8));
        assert!(leq_mod(7, 1, 8));
        for x in 0..8 {
            assert!(leq_mod(x, x, 8));
        }
    }

    #[test]
    fn clock_update_examples() {
        let f = |phase| ClockState { phase, role: Role::Follower };
        let l = |phase| ClockState { phase, role: Role::Leader };
        assert_eq!(clock_update(f(2), 5, 8, MaxMode::Circular), 5);
        assert_eq!(clock_update(l(2), 7, 8, MaxMode::Circular), 2);
        assert_eq!(clock_update(l(6), 7, 8, MaxMode::Capped), 7);
        assert_eq!(clock_update(l(3), 3, 8, MaxMode::Circular), 4);
        assert_eq!(clock_update(f(7), 0, 8, MaxMode::Circular), 0);
    }

    #[test]
    fn capped_never_exceeds_top() {
        for m in 2..=20u32 {
            for x in 0..m as Phase {
                for y in 0..m as Phase {
                    for role in [Role::Leader, Role::Follower] {
                        let z = clock_update(ClockState { phase: x, role }, y, m, MaxMode::Capped);
                        assert!((z as u32) < m);
                        assert!(z >= x);
                    }
                }
            }
        }
    }

    #[test]
    fn passed_zero_examples() {
        assert!(passed_zero(5, 3));
        assert!(!passed_zero(3, 5));
        assert!(passed_zero(7, 0));
        assert!(!passed_zero(4, 4));
    }

    #[test]
    fn only_the_responder_moves() {
        let mut p = ClockProtocol::new(64, 16, 8, 3);
        let mut s = Scheduler::new(64, 3);
        for _ in 0..20_000 {
            let before = p.agents().to_vec();
            let it = s.draw();
            p.interact(it);
            for (idx, (a, b)) in before.iter().zip(p.agents()).enumerate() {
                if idx != it.responder {
                    assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn pending_tick_is_consumed_once() {
        let mut p = ClockProtocol::new(2, 8, 1, 100);
        // Agent 0 leads. Put it at 7 so the next leader update wraps to 0.
        p.agents[0].ordinary = 7;
        p.agents[1].ordinary = 7;
        p.interact(Interaction { responder: 0, initiator: 1 });
        assert_eq!(p.agents[0].ordinary, 0);
        assert!(p.agents[0].flags.meaningful_pending);
        assert_eq!(p.agents[0].external, 0);
        p.interact(Interaction { responder: 1, initiator: 0 });
        assert_eq!(p.agents[0].external, 0, "initiator side never ticks");
        p.interact(Interaction { responder: 0, initiator: 1 });
        assert!(!p.agents[0].flags.meaningful_pending);
        assert_eq!(p.agents[0].external, 1);
    }

    #[test]
    fn clock_run_finishes_with_expected_junta() {
        let mut c = SimConfig::new(Variant::ClockOnly, 1024, 8);
        c.clock_passes = 3;
        let p = ClockProtocol::from_config(&c);
        assert_eq!(p.leader_count(), junta_size_for(1024, 3.0 / 7.0));
        // 1024^(4/7) = 2^(40/7) ≈ 52.50
        assert_eq!(junta_size_for(1024, 3.0 / 7.0), 53);
        let report = Simulator::new(c, p).unwrap().run();
        assert!(report.stabilized);
        assert_eq!(report.junta_size, Some(53));
    }

    #[test]
    fn void_everything_freezes_clocks() {
        let mut p = ClockProtocol::new(32, 16, 4, 1).with_perturbation(Perturbation {
            seed: 1,
            demote_fraction: 0.0,
            demote_at: 0,
            void_probability: 1.0,
        });
        let mut s = Scheduler::new(32, 1);
        for _ in 0..5000 {
            p.interact(s.draw());
        }
        assert!(p.agents().iter().all(|a| a.ordinary == 0));
    }

    #[test]
    fn demotion_halves_leaders() {
        let mut p = ClockProtocol::new(100, 16, 40, 1).with_perturbation(Perturbation {
            seed: 9,
            demote_fraction: 0.5,
            demote_at: 1,
            void_probability: 0.0,
        });
        p.interact(Interaction { responder: 0, initiator: 1 });
        assert_eq!(p.leader_count(), 20);
        assert_eq!(p.agents().iter().filter(|a| a.role == Role::Leader).count(), 20);
    }
}
