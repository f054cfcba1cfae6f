//! One-way epidemic: `x, y -> max{x, y}, y`.

use crate::engine::{Interaction, Protocol, RunReport};

/// `true` once infected; never reverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct EpidemicState {
    pub infected: bool,
}

/// New responder value. The initiator never changes.
#[inline]
pub fn epidemic_step(responder: bool, initiator: bool) -> bool {
    responder | initiator
}

pub fn epidemic_complete(infected_count: usize, n: usize) -> bool {
    debug_assert!(infected_count <= n);
    infected_count == n
}

/// Standalone epidemic from a single infected agent (index 0).
#[derive(Debug, Clone)]
pub struct EpidemicProtocol {
    agents: Vec<EpidemicState>,
    infected: usize,
    completed_at: Option<u64>,
    steps: u64,
}

impl EpidemicProtocol {
    pub fn new(n: usize) -> Self {
        let mut agents = vec![EpidemicState::default(); n];
        agents[0].infected = true;
        EpidemicProtocol {
            agents,
            infected: 1,
            completed_at: epidemic_complete(1, n).then_some(0),
            steps: 0,
        }
    }

    pub fn infected(&self) -> usize {
        self.infected
    }
}

impl Protocol for EpidemicProtocol {
    type Agent = EpidemicState;

    fn agents(&self) -> &[EpidemicState] {
        &self.agents
    }

    #[inline]
    fn interact(&mut self, it: Interaction) {
        self.steps += 1;
        let r = self.agents[it.responder].infected;
        let next = epidemic_step(r, self.agents[it.initiator].infected);
        if next != r {
            self.agents[it.responder].infected = next;
            self.infected += 1;
            if self.completed_at.is_none() && epidemic_complete(self.infected, self.agents.len()) {
                self.completed_at = Some(self.steps);
            }
        }
    }

    fn is_stabilized(&self) -> bool {
        epidemic_complete(self.infected, self.agents.len())
    }

    fn leader_count(&self) -> usize {
        0
    }

    fn state_key(&self, agent: &EpidemicState) -> u64 {
        agent.infected as u64
    }

    fn annotate(&self, report: &mut RunReport) {
        report.epidemic_completion = self.completed_at;
    }

    fn check_invariants(&self, step: u64, violations: &mut Vec<String>) {
        let counted = self.agents.iter().filter(|a| a.infected).count();
        if counted != self.infected {
            violations.push(format!(
                "step {step}: infected counter {} disagrees with population scan {counted}",
                self.infected
            ));
        }
    }
}

/// Expected interactions for one infected agent to reach all `n`:
/// `Σ_{i=1}^{n-1} n(n-1) / (i(n-i))`.
pub fn expected_completion(n: usize) -> f64 {
    let nf = n as f64;
    (1..n)
        .map(|i| {
            let i = i as f64;
            nf * (nf - 1.0) / (i * (nf - i))
        })
        .sum()
}
