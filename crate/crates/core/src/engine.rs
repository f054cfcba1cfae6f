//! Population array, seeded uniform scheduler and the interaction loop.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::StateAudit;
use crate::error::{ConfigError, EngineError};
use crate::{epidemic, junta, leader_election, phase_clock};

/// One scheduler draw. The responder is the agent whose state the
/// transition rules mostly rewrite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interaction {
    pub responder: usize,
    pub initiator: usize,
}

/// Uniform random scheduler over the `n(n-1)` ordered pairs of distinct agents.
///
/// The stream is ChaCha8 from `rand_chacha` 0.3 seeded with
/// `ChaCha8Rng::seed_from_u64(seed)`; indices come from `rand` 0.8's
/// precomputed `Uniform<u32>` samplers (widening multiply with an exact
/// rejection zone), which are value-stable within those major versions on
/// every platform. Each draw takes two bounded samples: the initiator over
/// `[0, n)`, then the responder over `[0, n-1)` with the initiator's slot
/// skipped.
#[derive(Debug, Clone)]
pub struct Scheduler {
    rng: ChaCha8Rng,
    n: u32,
    initiator: Uniform<u32>,
    responder: Uniform<u32>,
}

impl Scheduler {
    pub const ALGORITHM: &'static str = "chacha8-rand_chacha-0.3/uniform-u32-rand-0.8/v2";

    pub fn new(n: usize, seed: u64) -> Self {
        assert!(n >= 2, "scheduler needs at least two agents");
        assert!(n <= u32::MAX as usize, "population too large for u32 indices");
        Scheduler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            n: n as u32,
            initiator: Uniform::new(0, n as u32),
            responder: Uniform::new(0, n as u32 - 1),
        }
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn draw(&mut self) -> Interaction {
        let initiator = self.initiator.sample(&mut self.rng);
        let mut responder = self.responder.sample(&mut self.rng);
        if responder >= initiator {
            responder += 1;
        }
        Interaction {
            responder: responder as usize,
            initiator: initiator as usize,
        }
    }
}

/// Which protocol a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Fast,
    LasVegas,
    EpidemicOnly,
    JuntaOnly,
    ClockOnly,
    SlowOnly,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Fast,
        Variant::LasVegas,
        Variant::EpidemicOnly,
        Variant::JuntaOnly,
        Variant::ClockOnly,
        Variant::SlowOnly,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Fast => "fast",
            Variant::LasVegas => "las_vegas",
            Variant::EpidemicOnly => "epidemic_only",
            Variant::JuntaOnly => "junta_only",
            Variant::ClockOnly => "clock_only",
            Variant::SlowOnly => "slow_only",
        }
    }

    pub fn is_election(self) -> bool {
        matches!(self, Variant::Fast | Variant::LasVegas)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| ConfigError::UnknownVariant(s.to_string()))
    }
}

/// `⌈log₂ n⌉` for `n ≥ 1`.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// `⌈log₂ log₂ n⌉`, clamped at zero.
pub fn ceil_log2_log2(n: usize) -> u32 {
    let ll = (n as f64).log2().log2();
    if ll <= 0.0 {
        0
    } else {
        ll.ceil() as u32
    }
}

/// Run configuration. Optional fields fall back to the documented defaults
/// through the `effective_*` accessors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    /// Clock modulus; phases live in `Z_m`.
    pub m: u32,
    /// Junta exponent parameter, `ε = 3/(3k+1)`.
    pub k: u32,
    /// Forming_junta level cap (Las Vegas). Defaults to `⌈log₂log₂n⌉ + 6`.
    pub level_cap: Option<u32>,
    pub variant: Variant,
    pub seed: u64,
    pub max_interactions: Option<u64>,
    /// Snapshot cadence in interactions; defaults to `n`.
    pub snapshot_every: Option<u64>,
    /// Passes through zero every agent must complete before a `clock_only`
    /// run counts as finished.
    pub clock_passes: u32,
    /// Track the set of distinct agent states.
    pub audit_states: bool,
}

impl SimConfig {
    pub const DEFAULT_M: u32 = 16;
    pub const DEFAULT_K: u32 = 2;
    pub const LEVEL_CAP_SLACK: u32 = 6;

    pub fn new(variant: Variant, n: usize, seed: u64) -> Self {
        SimConfig {
            n,
            m: Self::DEFAULT_M,
            k: Self::DEFAULT_K,
            level_cap: None,
            variant,
            seed,
            max_interactions: None,
            snapshot_every: None,
            clock_passes: 20,
            audit_states: true,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 2 {
            return Err(ConfigError::PopulationTooSmall(self.n));
        }
        if !(2..=255).contains(&self.m) {
            return Err(ConfigError::BadModulus(self.m));
        }
        if self.k < 1 {
            return Err(ConfigError::BadJuntaExponent);
        }
        if self.max_interactions == Some(0) {
            return Err(ConfigError::ZeroInteractionCap);
        }
        if self.snapshot_every == Some(0) {
            return Err(ConfigError::ZeroSnapshotCadence);
        }
        if self.level_cap == Some(0) {
            return Err(ConfigError::ZeroLevelCap);
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        3.0 / (3.0 * self.k as f64 + 1.0)
    }

    pub fn effective_level_cap(&self) -> u32 {
        self.level_cap
            .unwrap_or_else(|| ceil_log2_log2(self.n) + Self::LEVEL_CAP_SLACK)
            .min(u8::MAX as u32)
    }

    pub fn effective_snapshot_every(&self) -> u64 {
        self.snapshot_every.unwrap_or(self.n as u64)
    }

    pub fn effective_max_interactions(&self) -> u64 {
        if let Some(cap) = self.max_interactions {
            return cap;
        }
        let n = self.n as u64;
        let lg = ceil_log2(self.n) as u64;
        match self.variant {
            Variant::EpidemicOnly | Variant::JuntaOnly => 50 * n * lg,
            Variant::Fast | Variant::LasVegas | Variant::ClockOnly => 2000 * n * lg * lg,
            Variant::SlowOnly => (2000 * n * lg * lg).max(20 * n * n),
        }
    }
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub n: usize,
    pub m: u32,
    pub k: u32,
    pub variant: Variant,
    pub interactions_total: u64,
    pub parallel_time: f64,
    pub stabilized: bool,
    pub leader_count_final: usize,
    /// `B*_{L*}`: agents that finished the junta at the maximum level.
    pub junta_size: Option<usize>,
    /// `L*`: the maximum level reached.
    pub max_level: Option<u32>,
    pub epidemic_completion: Option<u64>,
    pub leader_trajectory: Vec<(u64, usize)>,
    pub distinct_states_observed: Option<u64>,
    pub violations: Vec<String>,
}

impl RunReport {
    pub const CSV_HEADER: [&'static str; 12] = [
        "seed",
        "n",
        "m",
        "k",
        "variant",
        "interactions_total",
        "parallel_time",
        "stabilized",
        "leader_count_final",
        "junta_size",
        "max_level",
        "distinct_states_observed",
    ];

    pub fn csv_header() -> String {
        Self::CSV_HEADER.join(",")
    }

    /// One CSV row in [`RunReport::CSV_HEADER`] order; absent values are empty.
    pub fn csv_row(&self) -> String {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        [
            self.seed.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.k.to_string(),
            self.variant.to_string(),
            self.interactions_total.to_string(),
            self.parallel_time.to_string(),
            self.stabilized.to_string(),
            self.leader_count_final.to_string(),
            opt(self.junta_size),
            opt(self.max_level),
            opt(self.distinct_states_observed),
        ]
        .join(",")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    /// Maps an unstabilized run to [`EngineError::CapReached`].
    pub fn require_stabilized(self) -> Result<RunReport, EngineError> {
        if self.stabilized {
            Ok(self)
        } else {
            Err(EngineError::CapReached(self.interactions_total))
        }
    }
}

/// `interactions / n`.
pub fn parallel_time(interactions: u64, n: usize) -> f64 {
    assert!(n >= 1);
    interactions as f64 / n as f64
}

/// Seed for trial `i` of a sweep: the SplitMix64 finalizer applied to
/// `base + (i+1)·0x9E3779B97F4A7C15`. The finalizer is a bijection and the
/// increment is odd, so seeds never collide for distinct `i < 2^64`.
pub fn trial_seed(base: u64, i: u64) -> u64 {
    let mut z = base.wrapping_add(i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A population protocol driven by the engine. Implementations own the
/// population and keep whatever counters make the stabilization check O(1).
pub trait Protocol {
    type Agent: Copy;

    fn agents(&self) -> &[Self::Agent];
    fn interact(&mut self, it: Interaction);
    fn is_stabilized(&self) -> bool;
    fn leader_count(&self) -> usize;
    /// Injective encoding of an agent's full state, used by the state audit.
    fn state_key(&self, agent: &Self::Agent) -> u64;
    /// Fill protocol-specific report fields.
    fn annotate(&self, _report: &mut RunReport) {}
    /// Called at snapshot cadence; push a message per broken invariant.
    fn check_invariants(&self, _step: u64, _violations: &mut Vec<String>) {}
}

/// What a monitor sees besides the population.
#[derive(Debug, Clone, Copy)]
pub struct MonitorCtx {
    pub step: u64,
    pub interaction: Interaction,
    pub leader_count: usize,
}

/// Passive observer of a run. Monitors must not influence the protocol.
pub trait Monitor<A> {
    fn on_interaction(&mut self, _ctx: &MonitorCtx, _agents: &[A]) {}
    fn on_snapshot(&mut self, _step: u64, _agents: &[A], _leader_count: usize) {}
    fn violations(&self) -> Vec<String> {
        Vec::new()
    }
}

pub struct Simulator<'a, P: Protocol> {
    config: SimConfig,
    scheduler: Scheduler,
    protocol: P,
    steps: u64,
    cap: u64,
    cadence: u64,
    until_snapshot: u64,
    audit: Option<StateAudit>,
    monitors: Vec<&'a mut dyn Monitor<P::Agent>>,
    trajectory: Vec<(u64, usize)>,
    violations: Vec<String>,
}

impl<'a, P: Protocol> Simulator<'a, P> {
    pub fn new(config: SimConfig, protocol: P) -> Result<Self, ConfigError> {
        config.validate()?;
        assert_eq!(protocol.agents().len(), config.n, "population size mismatch");
        let audit = config.audit_states.then(|| {
            let mut audit = StateAudit::new();
            for a in protocol.agents() {
                audit.insert(protocol.state_key(a));
            }
            audit
        });
        let trajectory = vec![(0, protocol.leader_count())];
        Ok(Simulator {
            scheduler: Scheduler::new(config.n, config.seed),
            cap: config.effective_max_interactions(),
            cadence: config.effective_snapshot_every(),
            until_snapshot: config.effective_snapshot_every(),
            config,
            protocol,
            steps: 0,
            audit,
            monitors: Vec::new(),
            trajectory,
            violations: Vec::new(),
        })
    }

    pub fn add_monitor(&mut self, monitor: &'a mut dyn Monitor<P::Agent>) {
        self.monitors.push(monitor);
    }

    pub fn protocol(&self) -> &P {
        &self.protocol
    }

    pub fn protocol_mut(&mut self) -> &mut P {
        &mut self.protocol
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn step(&mut self) -> Interaction {
        let it = self.scheduler.draw();
        self.protocol.interact(it);
        self.steps += 1;
        if let Some(audit) = self.audit.as_mut() {
            let agents = self.protocol.agents();
            audit.insert(self.protocol.state_key(&agents[it.responder]));
            audit.insert(self.protocol.state_key(&agents[it.initiator]));
        }
        if !self.monitors.is_empty() {
            let ctx = MonitorCtx {
                step: self.steps,
                interaction: it,
                leader_count: self.protocol.leader_count(),
            };
            let agents = self.protocol.agents();
            for m in self.monitors.iter_mut() {
                m.on_interaction(&ctx, agents);
            }
        }
        self.until_snapshot -= 1;
        if self.until_snapshot == 0 {
            self.until_snapshot = self.cadence;
            self.snapshot();
        }
        it
    }

    fn snapshot(&mut self) {
        let leaders = self.protocol.leader_count();
        self.trajectory.push((self.steps, leaders));
        self.protocol
            .check_invariants(self.steps, &mut self.violations);
        let agents = self.protocol.agents();
        for m in self.monitors.iter_mut() {
            m.on_snapshot(self.steps, agents, leaders);
        }
    }

    /// Step until the protocol stabilizes or the interaction cap is hit.
    pub fn run_to_end(&mut self) {
        while !self.protocol.is_stabilized() && self.steps < self.cap {
            self.step();
        }
    }

    /// Step `extra` more interactions regardless of stabilization.
    pub fn run_extra(&mut self, extra: u64) {
        for _ in 0..extra {
            self.step();
        }
    }

    pub fn report(&self) -> RunReport {
        let mut trajectory = self.trajectory.clone();
        let leaders = self.protocol.leader_count();
        if trajectory.last().map(|&(s, _)| s) != Some(self.steps) {
            trajectory.push((self.steps, leaders));
        }
        let mut violations = self.violations.clone();
        for m in &self.monitors {
            violations.extend(m.violations());
        }
        let mut report = RunReport {
            seed: self.config.seed,
            n: self.config.n,
            m: self.config.m,
            k: self.config.k,
            variant: self.config.variant,
            interactions_total: self.steps,
            parallel_time: parallel_time(self.steps, self.config.n),
            stabilized: self.protocol.is_stabilized(),
            leader_count_final: leaders,
            junta_size: None,
            max_level: None,
            epidemic_completion: None,
            leader_trajectory: trajectory,
            distinct_states_observed: self.audit.as_ref().map(|a| a.len()),
            violations,
        };
        self.protocol.annotate(&mut report);
        report
    }

    pub fn run(mut self) -> RunReport {
        self.run_to_end();
        self.report()
    }
}

/// Build the configured variant's protocol and run it to completion.
pub fn run(config: &SimConfig) -> Result<RunReport, ConfigError> {
    config.validate()?;
    let c = config.clone();
    Ok(match config.variant {
        Variant::EpidemicOnly => Simulator::new(c, epidemic::EpidemicProtocol::new(config.n))?.run(),
        Variant::JuntaOnly => Simulator::new(c, junta::JuntaProtocol::new(config.n))?.run(),
        Variant::ClockOnly => {
            Simulator::new(c, phase_clock::ClockProtocol::from_config(config))?.run()
        }
        Variant::SlowOnly => Simulator::new(c, leader_election::SlowProtocol::new(config.n))?.run(),
        Variant::Fast | Variant::LasVegas => {
            Simulator::new(c, leader_election::ElectionProtocol::from_config(config))?.run()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frequencies(n: usize, draws: usize, seed: u64) -> Vec<f64> {
        let mut s = Scheduler::new(n, seed);
        let mut counts = vec![0usize; n * n];
        for _ in 0..draws {
            let it = s.draw();
            counts[it.responder * n + it.initiator] += 1;
        }
        counts.iter().map(|&c| c as f64 / draws as f64).collect()
    }

    #[test]
    fn two_agents_split_evenly() {
        let f = frequencies(2, 1_000_000, 11);
        assert_eq!(f[0], 0.0);
        assert_eq!(f[3], 0.0);
        assert!((f[1] - 0.5).abs() < 0.01);
        assert!((f[2] - 0.5).abs() < 0.01);
    }

    #[test]
    fn three_agents_cover_six_pairs() {
        let f = frequencies(3, 1_000_000, 12);
        for r in 0..3 {
            for i in 0..3 {
                let p = f[r * 3 + i];
                if r == i {
                    assert_eq!(p, 0.0);
                } else {
                    assert!((p - 1.0 / 6.0).abs() < 0.01, "({r},{i}) -> {p}");
                }
            }
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let mut a = Scheduler::new(17, 99);
        let mut b = Scheduler::new(17, 99);
        for _ in 0..1000 {
            assert_eq!(a.draw(), b.draw());
        }
        let mut c = Scheduler::new(17, 100);
        let same = (0..1000).filter(|_| a.draw() == c.draw()).count();
        assert!(same < 100);
    }

    #[test]
    fn parallel_time_examples() {
        assert_eq!(parallel_time(0, 5), 0.0);
        assert_eq!(parallel_time(102_400, 1024), 100.0);
        assert_eq!(parallel_time(0, 1), 0.0);
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig::new(Variant::Fast, 1, 0);
        assert_eq!(c.validate(), Err(ConfigError::PopulationTooSmall(1)));
        c.n = 8;
        assert!(c.validate().is_ok());
        c.m = 1;
        assert_eq!(c.validate(), Err(ConfigError::BadModulus(1)));
        c.m = 16;
        c.k = 0;
        assert_eq!(c.validate(), Err(ConfigError::BadJuntaExponent));
        c.k = 2;
        c.max_interactions = Some(0);
        assert_eq!(c.validate(), Err(ConfigError::ZeroInteractionCap));
    }

    #[test]
    fn epsilon_and_defaults() {
        let c = SimConfig::new(Variant::LasVegas, 1024, 0);
        assert!((c.epsilon() - 3.0 / 7.0).abs() < 1e-15);
        assert_eq!(c.effective_level_cap(), 4 + 6);
        assert_eq!(c.effective_snapshot_every(), 1024);
        assert_eq!(c.effective_max_interactions(), 2000 * 1024 * 100);
        let e = SimConfig::new(Variant::EpidemicOnly, 1024, 0);
        assert_eq!(e.effective_max_interactions(), 50 * 1024 * 10);
    }

    #[test]
    fn log_helpers() {
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(1024), 10);
        assert_eq!(ceil_log2(1025), 11);
        assert_eq!(ceil_log2_log2(1 << 16), 4);
        assert_eq!(ceil_log2_log2(1 << 12), 4);
        assert_eq!(ceil_log2_log2(4), 1);
        assert_eq!(ceil_log2_log2(2), 0);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("quick".parse::<Variant>().is_err());
    }

    #[test]
    fn trial_seeds_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..100_000).map(|i| trial_seed(42, i)).collect();
        assert_eq!(seeds.len(), 100_000);
    }
}
